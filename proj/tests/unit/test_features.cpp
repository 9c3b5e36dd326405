#include "metrack/features.hpp"
#include "metrack/image.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

#ifdef METRACK_HAVE_PNG
#include <png.h>
#endif

using namespace metrack;
namespace fs = std::filesystem;

namespace {

Patch random_patch(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Patch p;
    for (int r = 0; r < kPatchSide; ++r) {
        for (int c = 0; c < kPatchSide; ++c) p.pixels(r, c) = u(rng);
    }
    return p;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("metrack_unit_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Sum of each bin over every cell of the full-patch mode.
Vec full_mode_bins(const Vec& hog) {
    Vec bins = Vec::Zero(kHogBins);
    for (int cell = 0; cell < 9; ++cell) bins += hog.segment(cell * kHogBins, kHogBins);
    return bins;
}

}  // namespace

TEST_CASE("HOG length, zero for constant patches, and oracle agreement") {
    Patch flat;
    flat.pixels.setConstant(0.42);
    const Vec h = hog405(flat);
    CHECK(h.size() == 405);
    CHECK(h.isZero(0.0));

    Rng rng(77);
    for (int i = 0; i < 25; ++i) {
        const Patch p = random_patch(rng);
        const Vec got = hog405(p);
        const Vec want = oracle::naive_hog405(p.pixels);
        REQUIRE(got.size() == 405);
        CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("HOG cells are unit norm or zero") {
    Rng rng(8);
    const Vec h = hog405(random_patch(rng));
    for (int cell = 0; cell < 45; ++cell) {
        const double n = h.segment(cell * kHogBins, kHogBins).norm();
        CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("HOG orientation of step edges") {
    // Intensity step between the top and bottom halves: vertical gradients.
    Patch top_bottom;
    top_bottom.pixels.topRows(16).setConstant(0.0);
    top_bottom.pixels.bottomRows(16).setConstant(1.0);
    const Vec tb = full_mode_bins(hog405(top_bottom));
    Eigen::Index best = 0;
    tb.maxCoeff(&best);
    CHECK(best == 4);  // bin centred on 90 degrees

    // Left/right step: horizontal gradients split between the 10 and 170 bins.
    Patch left_right;
    left_right.pixels.leftCols(16).setConstant(0.0);
    left_right.pixels.rightCols(16).setConstant(1.0);
    const Vec lr = full_mode_bins(hog405(left_right));
    CHECK(lr[0] == doctest::Approx(lr[8]));
    CHECK(lr[0] > lr.segment(1, 7).maxCoeff());
}

TEST_CASE("HOG mode layout") {
    const auto& modes = hog_modes();
    CHECK(modes[0].rows == 32);
    CHECK(modes[1].rows == 21);
    CHECK(modes[2].row0 == 11);
    CHECK(modes[4].col0 == 11);
    CHECK(cell_edge(21, 1) == 7);
    CHECK(cell_edge(32, 2) == 21);
}

TEST_CASE("raw pixel features are centred and unit norm") {
    Rng rng(2);
    const Vec v = raw_pixels(random_patch(rng));
    CHECK(v.size() == kRawDim);
    CHECK(std::abs(v.sum()) < 1e-10);
    CHECK(v.norm() == doctest::Approx(1.0));
    Patch flat;
    flat.pixels.setConstant(0.3);
    CHECK(raw_pixels(flat).isZero(0.0));
    CHECK(parse_feature_mode("raw_pixels") == FeatureMode::RawPixels);
    CHECK(to_string(FeatureMode::Hog405) == "hog405");
    CHECK_THROWS_AS(parse_feature_mode("sift"), InputError);
}

TEST_CASE("patch extraction reproduces an aligned 32x32 region") {
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat px(48, 64);
    for (Eigen::Index r = 0; r < px.rows(); ++r) {
        for (Eigen::Index c = 0; c < px.cols(); ++c) px(r, c) = u(rng);
    }
    const GrayFrame frame = GrayFrame::from_matrix(px);
    const Patch p = extract_patch(frame, {10, 5, 32, 32});
    CHECK((p.pixels - px.block(5, 10, 32, 32)).cwiseAbs().maxCoeff() < 1e-12);

    // Boxes hanging off the frame read replicated border pixels.
    const Patch edge = extract_patch(frame, {-40, -40, 32, 32});
    CHECK((edge.pixels.array() == px(0, 0)).all());
    CHECK_THROWS_AS(extract_patch(frame, {0, 0, 0, 10}), InputError);
}

TEST_CASE("GrayFrame validation") {
    CHECK_THROWS_AS(GrayFrame(8, 32), InputError);
    CHECK_THROWS_AS(GrayFrame::from_matrix(Mat::Constant(20, 20, 1.5)), InputError);
    const GrayFrame f(20, 16, 0.5);
    CHECK(f.contains({0, 0, 20, 16}));
    CHECK_FALSE(f.contains({1, 0, 20, 16}));
}

TEST_CASE("PGM round trip is bit exact") {
    const fs::path dir = scratch_dir("pgm");
    std::vector<unsigned char> bytes(20 * 17);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<unsigned char>((i * 37) % 256);
    {
        std::ofstream out(dir / "a.pgm", std::ios::binary);
        out << "P5\n# a comment line\n20 17\n255\n";
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    const GrayFrame f = read_pgm(dir / "a.pgm");
    CHECK(f.width() == 20);
    CHECK(f.height() == 17);
    CHECK(f.at(0, 1) == doctest::Approx(37.0 / 255.0));

    write_pgm(dir / "b.pgm", f);
    std::ifstream in(dir / "b.pgm", std::ios::binary);
    std::string header;
    std::getline(in, header);
    CHECK(header == "P5");
    std::getline(in, header);
    CHECK(header == "20 17");
    std::getline(in, header);
    CHECK(header == "255");
    std::vector<unsigned char> back(bytes.size());
    in.read(reinterpret_cast<char*>(back.data()), static_cast<std::streamsize>(back.size()));
    CHECK(back == bytes);
    CHECK(read_pgm(dir / "b.pgm").pixels() == f.pixels());
}

TEST_CASE("PGM error handling") {
    const fs::path dir = scratch_dir("pgm_bad");
    {
        std::ofstream out(dir / "ascii.pgm");
        out << "P2\n16 16\n255\n0 0 0\n";
    }
    CHECK_THROWS_AS(read_pgm(dir / "ascii.pgm"), IoError);
    {
        std::ofstream out(dir / "short.pgm", std::ios::binary);
        out << "P5\n16 16\n255\n" << std::string(10, 'x');
    }
    CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), IoError);
    CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), IoError);
    CHECK_THROWS_AS(load_frame(dir / "frame.bmp"), IoError);
}

TEST_CASE("frame listing sorts numerically and reports gaps") {
    const fs::path dir = scratch_dir("frames");
    const GrayFrame f(16, 16, 0.5);
    for (int i : {1, 2, 10, 3, 4, 5, 6, 7, 8, 9}) {
        write_pgm(dir / ("img" + std::to_string(i) + ".pgm"), f);
    }
    std::ofstream(dir / "notes.txt") << "ignored";
    const auto frames = list_frames(dir);
    REQUIRE(frames.size() == 10);
    CHECK(frames[2].filename() == "img3.pgm");
    CHECK(frames[9].filename() == "img10.pgm");

    fs::remove(dir / "img4.pgm");
    try {
        list_frames(dir);
        FAIL("expected a gap error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("missing frame 4") != std::string::npos);
    }
    CHECK_THROWS_AS(list_frames(dir / "nope"), IoError);
}

#ifdef METRACK_HAVE_PNG
TEST_CASE("PNG frames are read as grayscale") {
    const fs::path dir = scratch_dir("png");
    std::vector<unsigned char> px(16 * 16);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<unsigned char>(i);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = 16;
    image.height = 16;
    image.format = PNG_FORMAT_GRAY;
    REQUIRE(png_image_write_to_file(&image, (dir / "f0.png").string().c_str(), 0, px.data(), 0,
                                    nullptr));
    const GrayFrame f = load_frame(dir / "f0.png");
    CHECK(f.width() == 16);
    CHECK(f.at(1, 2) == doctest::Approx(18.0 / 255.0));
}
#endif
