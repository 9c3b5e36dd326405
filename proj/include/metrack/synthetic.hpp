#pragma once

// Seeded synthetic sequences used by the test suites and the `synth` command.

#include "metrack/common.hpp"
#include "metrack/eval.hpp"
#include "metrack/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace metrack {

struct TranslationSequenceConfig {
    int frames = 100;
    int width = 256;
    int height = 96;
    int square = 24;       // side of the textured square
    int texture_block = 4; // side of one random texture block
    double start_x = 16.0;
    double start_y = 36.0;
    double vx = 2.0;       // pixels per frame
    double vy = 0.0;
    double background = 0.5;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
};

struct SyntheticSequence {
    std::vector<GrayFrame> frames;
    BoxSequence ground_truth;  // frame index -> box
};

/// A randomly textured square moving at constant velocity over a flat
/// background, with i.i.d. Gaussian pixel noise clamped to [0, 1].
SyntheticSequence make_translation_sequence(const TranslationSequenceConfig& cfg);

/// Writes frame_0000.pgm, frame_0001.pgm, ... and groundtruth.csv into `dir`.
void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq);

/// Stripe orientations used by the identification fixture, one per class.
enum class StripeOrientation { Horizontal, Vertical, Diagonal };

/// side x side stripe pattern 0.5 + amplitude * sin(2 pi (proj + phase) / period).
Mat stripe_pattern(StripeOrientation orientation, int side, double period, double phase,
                   double amplitude = 0.4);

struct IdentifyFixtureConfig {
    int frames = 40;
    int width = 160;
    int height = 96;
    int object = 32;
    double speed = 1.0;  // pixels per frame along x
    double noise_sigma = 0.02;
    double stripe_period = 8.0;
    int templates_per_class = 4;
    int blank_begin = 20;  // frames [blank_begin, blank_end) are blanked
    int blank_end = 24;
    std::uint64_t seed = 0;
};

struct IdentifySequence {
    std::string class_id;
    std::filesystem::path frames_dir;
    std::filesystem::path config_path;
    BoundingBox init_box;
};

struct IdentifyFixture {
    std::filesystem::path templates_dir;
    std::vector<IdentifySequence> sequences;
    std::vector<std::int64_t> blanked_frames;
};

/// Writes templates/<class>/ and one striped-object sequence per class with
/// a run config next to it. Blanked frames are a constant 0.5.
IdentifyFixture write_identify_fixture(const std::filesystem::path& root,
                                       const IdentifyFixtureConfig& cfg);

}  // namespace metrack
