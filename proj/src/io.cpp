#include "stvig/io.hpp"

#include <cstring>
#include <iomanip>
#include <sstream>

namespace stvig {

namespace detail {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void write_f32(std::ostream& os, const std::vector<float>& v) {
    // little-endian host assumed; raw IEEE-754 words
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& is) {
    const std::uint64_t lo = read_u32(is);
    const std::uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

void read_f32(std::istream& is, std::vector<float>& v, std::size_t n) {
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
}

}  // namespace detail

// --- frames -----------------------------------------------------------------

Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open image: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw std::runtime_error("not a binary PPM (P6): " + path);
    auto next_token = [&is, &path]() {
        std::string tok;
        while (is >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("truncated PPM header: " + path);
    };
    Image im;
    im.width = std::stoi(next_token());
    im.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval != 255) throw std::runtime_error("unsupported PPM maxval in " + path);
    is.get();  // single whitespace after header
    im.rgb.resize(static_cast<std::size_t>(im.width) * im.height * 3);
    is.read(reinterpret_cast<char*>(im.rgb.data()), static_cast<std::streamsize>(im.rgb.size()));
    if (!is) throw std::runtime_error("truncated PPM data: " + path);
    return im;
}

void write_ppm(const std::string& path, const Image& im) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write image: " + path);
    os << "P6\n" << im.width << " " << im.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(im.rgb.data()), static_cast<std::streamsize>(im.rgb.size()));
}

RawVideoWriter::RawVideoWriter(const std::string& path, int width, int height)
    : out_(path, std::ios::binary), path_(path), width_(width), height_(height) {
    if (!out_) throw std::runtime_error("cannot write video container: " + path);
    detail::write_u32(out_, kRawVideoMagic);
    detail::write_u32(out_, static_cast<std::uint32_t>(width));
    detail::write_u32(out_, static_cast<std::uint32_t>(height));
    detail::write_u32(out_, 0);  // patched in close()
}

RawVideoWriter::~RawVideoWriter() {
    try {
        close();
    } catch (...) {
    }
}

void RawVideoWriter::append(const Image& im) {
    if (im.width != width_ || im.height != height_)
        throw std::invalid_argument("RawVideoWriter: frame resolution changed mid-stream");
    out_.write(reinterpret_cast<const char*>(im.rgb.data()), static_cast<std::streamsize>(im.rgb.size()));
    ++count_;
}

void RawVideoWriter::close() {
    if (!out_.is_open()) return;
    out_.seekp(12);
    detail::write_u32(out_, static_cast<std::uint32_t>(count_));
    out_.close();
    if (!out_.good() && count_ > 0) throw std::runtime_error("failed while finalizing " + path_);
}

RawVideoReader::RawVideoReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open video container: " + path);
    if (detail::read_u32(in_) != kRawVideoMagic)
        throw std::runtime_error("not a raw video container: " + path);
    width_ = static_cast<int>(detail::read_u32(in_));
    height_ = static_cast<int>(detail::read_u32(in_));
    count_ = static_cast<int>(detail::read_u32(in_));
}

Image RawVideoReader::frame(int index) {
    if (index < 0 || index >= count_) throw std::out_of_range("frame index out of range");
    Image im;
    im.width = width_;
    im.height = height_;
    const std::size_t frame_bytes = static_cast<std::size_t>(width_) * height_ * 3;
    im.rgb.resize(frame_bytes);
    in_.seekg(16 + static_cast<std::streamoff>(index) * static_cast<std::streamoff>(frame_bytes));
    in_.read(reinterpret_cast<char*>(im.rgb.data()), static_cast<std::streamsize>(frame_bytes));
    if (!in_) throw std::runtime_error("truncated video container");
    return im;
}

// --- keypoint traces ----------------------------------------------------------

void write_trace(const std::string& path, const SkeletonTrace& trace) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write trace: " + path);
    os << "fps " << trace.frame_rate << " resolution " << trace.width << " " << trace.height << "\n";
    os << std::setprecision(17);
    for (std::size_t f = 0; f < trace.frames.size(); ++f) {
        os << f;
        for (const auto& j : trace.frames[f]) os << " " << j.x << " " << j.y << " " << j.confidence;
        os << "\n";
    }
}

SkeletonTrace read_trace(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open trace: " + path);
    SkeletonTrace trace;
    std::string tag;
    if (!(is >> tag >> trace.frame_rate) || tag != "fps")
        throw std::runtime_error("trace header must start with 'fps': " + path);
    if (!(is >> tag >> trace.width >> trace.height) || tag != "resolution")
        throw std::runtime_error("trace header must carry 'resolution': " + path);
    long long idx;
    while (is >> idx) {
        FrameKeypoints kp;
        for (auto& j : kp)
            if (!(is >> j.x >> j.y >> j.confidence))
                throw std::runtime_error("truncated trace record in " + path);
        trace.frames.push_back(kp);
    }
    return trace;
}

void write_annotation(const std::string& path, const SeizureAnnotation& ann) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write annotation: " + path);
    os << std::setprecision(17);
    os << "eeg_onset " << ann.eeg_onset << "\n"
       << "clinical_onset " << ann.clinical_onset << "\n"
       << "recording_end " << ann.recording_end << "\n";
}

SeizureAnnotation read_annotation(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open annotation: " + path);
    SeizureAnnotation ann;
    std::string key;
    double value;
    bool got_eeg = false, got_clinical = false, got_end = false;
    while (is >> key >> value) {
        if (key == "eeg_onset") ann.eeg_onset = value, got_eeg = true;
        else if (key == "clinical_onset") ann.clinical_onset = value, got_clinical = true;
        else if (key == "recording_end") ann.recording_end = value, got_end = true;
        else throw std::runtime_error("unknown annotation key '" + key + "' in " + path);
    }
    if (!got_eeg || !got_clinical || !got_end)
        throw std::runtime_error("annotation must carry eeg_onset, clinical_onset and recording_end: " + path);
    ann.validate();
    return ann;
}

// --- model configuration ----------------------------------------------------------

void write_model_config(const std::string& path, const ModelConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write model config: " + path);
    os << std::setprecision(17);
    os << "variant " << variant_name(cfg.variant) << "\n"
       << "stem_channels " << cfg.stem_channels << "\n"
       << "depths " << cfg.stage_depths[0] << " " << cfg.stage_depths[1] << " "
       << cfg.stage_depths[2] << " " << cfg.stage_depths[3] << "\n"
       << "frames " << cfg.frames << "\n"
       << "e_inter " << cfg.e_inter << "\n"
       << "e_intra " << cfg.e_intra << "\n"
       << "ks " << cfg.ks << "\n"
       << "kt " << cfg.kt << "\n"
       << "pos_embed " << pos_embed_name(cfg.pos_embed) << "\n"
       << "dynamic_partition " << (cfg.dynamic_partition ? 1 : 0) << "\n"
       << "stochastic_shuffle " << (cfg.stochastic_shuffle ? 1 : 0) << "\n"
       << "patch " << cfg.patch.h << " " << cfg.patch.w << "\n"
       << "sigma_rel " << cfg.patch.sigma_rel << "\n";
}

ModelConfig read_model_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open model config: " + path);
    ModelConfig cfg;
    std::string key;
    while (is >> key) {
        if (key == "variant") {
            std::string v;
            is >> v;
            cfg.variant = variant_from_name(v);
        } else if (key == "stem_channels") is >> cfg.stem_channels;
        else if (key == "depths")
            is >> cfg.stage_depths[0] >> cfg.stage_depths[1] >> cfg.stage_depths[2] >>
                cfg.stage_depths[3];
        else if (key == "frames") is >> cfg.frames;
        else if (key == "e_inter") is >> cfg.e_inter;
        else if (key == "e_intra") is >> cfg.e_intra;
        else if (key == "ks") is >> cfg.ks;
        else if (key == "kt") is >> cfg.kt;
        else if (key == "pos_embed") {
            std::string v;
            is >> v;
            cfg.pos_embed = pos_embed_from_name(v);
        } else if (key == "dynamic_partition") {
            int v;
            is >> v;
            cfg.dynamic_partition = v != 0;
        } else if (key == "stochastic_shuffle") {
            int v;
            is >> v;
            cfg.stochastic_shuffle = v != 0;
        } else if (key == "patch") is >> cfg.patch.h >> cfg.patch.w;
        else if (key == "sigma_rel") is >> cfg.patch.sigma_rel;
        else throw std::runtime_error("unknown model config key '" + key + "' in " + path);
    }
    cfg.validate();
    return cfg;
}

// --- manifests ------------------------------------------------------------------

void write_manifest(const std::string& path, const std::vector<LabeledClip>& clips) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write manifest: " + path);
    os << std::setprecision(17);
    for (const auto& c : clips)
        os << c.recording << " " << c.start << " " << c.end << " " << c.label << " "
           << period_name(c.period) << "\n";
}

std::vector<LabeledClip> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<LabeledClip> clips;
    LabeledClip c;
    std::string period;
    while (is >> c.recording >> c.start >> c.end >> c.label >> period) {
        c.period = period_from_name(period);
        clips.push_back(c);
    }
    return clips;
}

// --- probability traces -----------------------------------------------------------

void write_probability_trace(const std::string& path, const ProbabilityTrace& trace) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write probability trace: " + path);
    os << std::setprecision(17);
    if (trace.annotation) {
        os << "# eeg_onset " << trace.annotation->eeg_onset << "\n";
        os << "# clinical_onset " << trace.annotation->clinical_onset << "\n";
        os << "# recording_end " << trace.annotation->recording_end << "\n";
    }
    for (const auto& s : trace.samples) os << s.time << " " << s.probability << "\n";
}

ProbabilityTrace read_probability_trace(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open probability trace: " + path);
    ProbabilityTrace trace;
    SeizureAnnotation ann;
    bool has_ann = false;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key;
            double value;
            ls >> hash >> key >> value;
            if (key == "eeg_onset") ann.eeg_onset = value, has_ann = true;
            else if (key == "clinical_onset") ann.clinical_onset = value;
            else if (key == "recording_end") ann.recording_end = value;
            continue;
        }
        ProbabilitySample s;
        if (!(ls >> s.time >> s.probability))
            throw std::runtime_error("bad probability trace line: " + line);
        trace.samples.push_back(s);
    }
    if (has_ann) trace.annotation = ann;
    return trace;
}

}  // namespace stvig
