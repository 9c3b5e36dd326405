#include "metrack/synthetic.hpp"

#include "metrack/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace fs = std::filesystem;

namespace metrack {

namespace {

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d.pgm", index);
    return buf;
}

void add_noise_and_clamp(Mat& px, double sigma, Rng& rng) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index c = 0; c < px.cols(); ++c) {
        for (Eigen::Index r = 0; r < px.rows(); ++r) {
            const double n = sigma > 0.0 ? noise(rng) : 0.0;
            px(r, c) = std::clamp(px(r, c) + n, 0.0, 1.0);
        }
    }
}

// Pastes `patch` with its top-left corner at (x0, y0), clipped to the frame.
void paste(Mat& frame, const Mat& patch, int x0, int y0) {
    for (Eigen::Index r = 0; r < patch.rows(); ++r) {
        for (Eigen::Index c = 0; c < patch.cols(); ++c) {
            const Eigen::Index fr = y0 + r;
            const Eigen::Index fc = x0 + c;
            if (fr >= 0 && fc >= 0 && fr < frame.rows() && fc < frame.cols()) {
                frame(fr, fc) = patch(r, c);
            }
        }
    }
}

}  // namespace

SyntheticSequence make_translation_sequence(const TranslationSequenceConfig& cfg) {
    if (cfg.frames < 1 || cfg.square < 1 || cfg.texture_block < 1) {
        throw InputError("synthetic sequence needs frames, square and block sizes >= 1");
    }
    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> shade(0.05, 0.95);
    const int blocks = (cfg.square + cfg.texture_block - 1) / cfg.texture_block;
    Mat block_values(blocks, blocks);
    for (Eigen::Index c = 0; c < blocks; ++c) {
        for (Eigen::Index r = 0; r < blocks; ++r) block_values(r, c) = shade(rng);
    }
    Mat texture(cfg.square, cfg.square);
    for (int r = 0; r < cfg.square; ++r) {
        for (int c = 0; c < cfg.square; ++c) {
            texture(r, c) = block_values(r / cfg.texture_block, c / cfg.texture_block);
        }
    }

    SyntheticSequence seq;
    for (int t = 0; t < cfg.frames; ++t) {
        const double x = cfg.start_x + cfg.vx * t;
        const double y = cfg.start_y + cfg.vy * t;
        Mat px = Mat::Constant(cfg.height, cfg.width, cfg.background);
        paste(px, texture, static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
        add_noise_and_clamp(px, cfg.noise_sigma, rng);
        seq.frames.push_back(GrayFrame::from_matrix(std::move(px)));
        seq.ground_truth[t] = BoundingBox{std::round(x), std::round(y),
                                          static_cast<double>(cfg.square),
                                          static_cast<double>(cfg.square)};
    }
    return seq;
}

void write_sequence(const fs::path& dir, const SyntheticSequence& seq) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        write_pgm(dir / frame_name(static_cast<int>(i)), seq.frames[i]);
    }
    write_boxes_csv(dir / "groundtruth.csv", seq.ground_truth);
}

Mat stripe_pattern(StripeOrientation orientation, int side, double period, double phase,
                   double amplitude) {
    Mat out(side, side);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            double proj = 0.0;
            switch (orientation) {
                case StripeOrientation::Horizontal: proj = r; break;
                case StripeOrientation::Vertical: proj = c; break;
                case StripeOrientation::Diagonal: proj = (r + c) / std::numbers::sqrt2; break;
            }
            out(r, c) = 0.5 + amplitude * std::sin(2.0 * std::numbers::pi * (proj + phase) / period);
        }
    }
    return out;
}

IdentifyFixture write_identify_fixture(const fs::path& root, const IdentifyFixtureConfig& cfg) {
    if (cfg.frames < 1 || cfg.templates_per_class < 1) {
        throw InputError("identify fixture needs at least one frame and one template");
    }
    if (cfg.object + cfg.speed * cfg.frames + 8 > cfg.width || cfg.object + 8 > cfg.height) {
        throw InputError("identify fixture frame is too small for the object path");
    }
    const std::pair<const char*, StripeOrientation> classes[] = {
        {"horizontal", StripeOrientation::Horizontal},
        {"vertical", StripeOrientation::Vertical},
        {"diagonal", StripeOrientation::Diagonal},
    };
    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    IdentifyFixture fixture;
    fixture.templates_dir = root / "templates";
    for (int t = cfg.blank_begin; t < cfg.blank_end && t < cfg.frames; ++t) {
        if (t >= 0) fixture.blanked_frames.push_back(t);
    }

    for (const auto& [name, orientation] : classes) {
        const fs::path tdir = fixture.templates_dir / name;
        fs::create_directories(tdir);
        for (int k = 0; k < cfg.templates_per_class; ++k) {
            const double phase = cfg.stripe_period * k / cfg.templates_per_class;
            Mat px = stripe_pattern(orientation, cfg.object, cfg.stripe_period, phase);
            char file[32];
            std::snprintf(file, sizeof file, "template_%02d.pgm", k);
            write_pgm(tdir / file, GrayFrame::from_matrix(std::move(px)));
        }

        IdentifySequence seq;
        seq.class_id = name;
        seq.frames_dir = root / (std::string("seq_") + name);
        fs::create_directories(seq.frames_dir);
        const Mat object =
            stripe_pattern(orientation, cfg.object, cfg.stripe_period, cfg.stripe_period * unit(rng));
        const double x0 = 4.0;
        const double y0 = std::floor((cfg.height - cfg.object) / 2.0);
        seq.init_box = {x0, y0, static_cast<double>(cfg.object), static_cast<double>(cfg.object)};
        for (int t = 0; t < cfg.frames; ++t) {
            Mat px = Mat::Constant(cfg.height, cfg.width, 0.5);
            const bool blank = t >= cfg.blank_begin && t < cfg.blank_end;
            if (!blank) {
                paste(px, object, static_cast<int>(std::lround(x0 + cfg.speed * t)),
                      static_cast<int>(y0));
                add_noise_and_clamp(px, cfg.noise_sigma, rng);
            }
            write_pgm(seq.frames_dir / frame_name(t), GrayFrame::from_matrix(std::move(px)));
        }

        RunConfig run;
        run.tracker.rng_seed = cfg.seed;
        run.input_dir = seq.frames_dir.filename();
        run.init_box = seq.init_box;
        run.trajectory_out = std::string("out_") + name + "/trajectory.csv";
        run.diagnostics_out = std::string("out_") + name + "/diagnostics.json";
        run.identities_out = std::string("out_") + name + "/identities.csv";
        seq.config_path = root / (std::string(name) + ".cfg");
        write_text_file(seq.config_path, format_config(run));
        fixture.sequences.push_back(seq);
    }
    return fixture;
}

}  // namespace metrack
