#include "metrack/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#ifdef METRACK_HAVE_PNG
#include <png.h>
#endif

namespace fs = std::filesystem;

namespace metrack {

GrayFrame::GrayFrame(int width, int height, double fill) {
    if (width < kMinSide || height < kMinSide) {
        throw InputError("frame dimensions must be at least 16x16");
    }
    pixels_ = Mat::Constant(height, width, fill);
}

GrayFrame GrayFrame::from_matrix(Mat pixels) {
    if (pixels.cols() < kMinSide || pixels.rows() < kMinSide) {
        throw InputError("frame dimensions must be at least 16x16");
    }
    if (!pixels.allFinite() || pixels.minCoeff() < 0.0 || pixels.maxCoeff() > 1.0) {
        throw InputError("frame intensities must lie in [0, 1]");
    }
    GrayFrame f;
    f.pixels_ = std::move(pixels);
    return f;
}

bool GrayFrame::contains(const BoundingBox& box) const {
    return box.w > 0.0 && box.h > 0.0 && box.x >= 0.0 && box.y >= 0.0 &&
           box.x + box.w <= width() && box.y + box.h <= height();
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int parse_header_int(std::istream& in, const fs::path& path, const char* field) {
    const std::string tok = next_token(in);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError("malformed PGM header (" + std::string(field) + ") in " + path.string());
    }
}

}  // namespace

GrayFrame read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    if (next_token(in) != "P5") {
        throw IoError("not a binary PGM (P5): " + path.string());
    }
    const int width = parse_header_int(in, path, "width");
    const int height = parse_header_int(in, path, "height");
    const int maxval = parse_header_int(in, path, "maxval");
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
        throw IoError("unsupported PGM geometry or maxval in " + path.string());
    }
    // next_token consumed exactly one whitespace byte after maxval.
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw IoError("truncated PGM pixel data in " + path.string());
    }
    Mat px(height, width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            px(r, c) = std::min(1.0, raw[static_cast<std::size_t>(r) * width + c] /
                                         static_cast<double>(maxval));
        }
    }
    return GrayFrame::from_matrix(std::move(px));
}

void write_pgm(const fs::path& path, const GrayFrame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(frame.width()) * frame.height());
    for (int r = 0; r < frame.height(); ++r) {
        for (int c = 0; c < frame.width(); ++c) {
            const double v = std::clamp(frame.at(r, c), 0.0, 1.0);
            raw[static_cast<std::size_t>(r) * frame.width() + c] =
                static_cast<unsigned char>(std::lround(v * 255.0));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

GrayFrame read_png(const fs::path& path) {
#ifdef METRACK_HAVE_PNG
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> raw(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }
    const int width = static_cast<int>(image.width);
    const int height = static_cast<int>(image.height);
    Mat px(height, width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            px(r, c) = raw[static_cast<std::size_t>(r) * width + c] / 255.0;
        }
    }
    return GrayFrame::from_matrix(std::move(px));
#else
    throw IoError("PNG support not compiled in: " + path.string());
#endif
}

namespace {

std::string lower_ext(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

}  // namespace

GrayFrame load_frame(const fs::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw IoError("unsupported frame format: " + path.string());
}

std::vector<fs::path> list_frames(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw IoError("frame directory does not exist: " + dir.string());
    }
    std::map<long long, fs::path> numbered;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = lower_ext(entry.path());
        if (ext != ".pgm" && ext != ".png") continue;
        const std::string stem = entry.path().stem().string();
        // Numeric suffix of the stem, e.g. "img0042" -> 42.
        std::size_t start = stem.size();
        while (start > 0 && std::isdigit(static_cast<unsigned char>(stem[start - 1]))) --start;
        if (start == stem.size()) continue;
        const long long index = std::stoll(stem.substr(start));
        if (!numbered.emplace(index, entry.path()).second) {
            throw InputError("duplicate frame number " + std::to_string(index) + " in " +
                             dir.string());
        }
    }
    if (numbered.empty()) {
        throw InputError("no numbered *.pgm / *.png frames in " + dir.string());
    }
    std::vector<fs::path> out;
    long long expected = numbered.begin()->first;
    for (const auto& [index, path] : numbered) {
        if (index != expected) {
            throw InputError("missing frame " + std::to_string(expected) + " in " + dir.string());
        }
        out.push_back(path);
        ++expected;
    }
    return out;
}

}  // namespace metrack
