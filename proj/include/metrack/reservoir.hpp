#pragma once

// Time-weighted reservoir sample buffers.
//
// Each sample receives weight w = q^frame and key k = u^(1/w), u ~ U(0,1);
// a full buffer keeps the entries with the largest keys. Keys are stored as
// z = log(-log u) - frame * log q, a decreasing transform of k that does not
// overflow for long streams: larger k <=> smaller z.

#include "metrack/common.hpp"
#include "metrack/linalg.hpp"
#include "metrack/metric.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace metrack {

enum class SampleLabel { Foreground, Background };

struct SamplerConfig {
    std::size_t capacity = 300;
    double q_factor = 1.6;

    void validate() const;
};

struct BufferEntry {
    Vec sample;
    std::int64_t frame_index = 0;
    double log_weight = 0.0;   // frame_index * log q
    double key_order = 0.0;    // log(-log u) - log_weight; smaller is a larger key
    std::uint64_t entry_id = 0;

    /// k = u^(1/w). Rounds to 0 or 1 once the weight leaves double range.
    double key() const;
    double weight() const;
};

struct InsertResult {
    enum class Kind { Appended, Replaced, Rejected };
    Kind kind = Kind::Appended;
    /// Replaced: the evicted entry. Rejected: the new entry that was turned away.
    std::optional<BufferEntry> evicted;
    /// Id of the entry now holding `sample` (Appended / Replaced only).
    std::uint64_t entry_id = 0;
};

class SampleBuffer {
public:
    SampleBuffer(SampleLabel label, std::size_t capacity);

    SampleLabel label() const { return label_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<BufferEntry>& entries() const { return entries_; }

    /// Index of the smallest-key entry; ties go to the smallest entry_id.
    std::size_t min_key_index() const;
    const BufferEntry& min_key_entry() const;

    InsertResult insert(const Vec& sample, std::int64_t frame_index, const SamplerConfig& cfg,
                        Rng& rng);

    /// Inserts with a caller-supplied uniform draw. Used for deterministic tests.
    InsertResult insert_with_uniform(const Vec& sample, std::int64_t frame_index,
                                     const SamplerConfig& cfg, double u);

    std::size_t index_of(std::uint64_t entry_id) const;

private:
    SampleLabel label_;
    std::size_t capacity_;
    std::vector<BufferEntry> entries_;
    std::uint64_t next_id_ = 1;
    std::int64_t last_frame_ = std::numeric_limits<std::int64_t>::min();
};

/// Draws `count` triplets with the anchor fixed, positives uniformly from the
/// anchor's own class buffer and negatives uniformly from the other buffer.
/// Returns an empty list if either buffer is empty.
std::vector<Triplet> generate_triplets(const SampleBuffer& fg, const SampleBuffer& bg,
                                       const Vec& anchor, SampleLabel anchor_label,
                                       std::size_t count, Rng& rng);

struct WeightedSample {
    Vec sample;
    double weight = 1.0;
};

/// Weight-normalized double sum of triplet losses of `anchor` against every
/// (same-class, other-class) pair.
double weighted_empirical_loss(const MetricMatrix& metric, const Vec& anchor,
                               std::span<const WeightedSample> same_class,
                               std::span<const WeightedSample> other_class);

}  // namespace metrack
