#include "metrack/reservoir.hpp"

#include <cmath>
#include <limits>

namespace metrack {

void SamplerConfig::validate() const {
    if (capacity < 1) {
        throw InputError("sample buffer capacity must be >= 1");
    }
    if (!(q_factor >= 1.0) || !std::isfinite(q_factor)) {
        throw InputError("time-weight factor q must be finite and >= 1");
    }
}

double BufferEntry::key() const {
    // k = exp(log u / w) = exp(-exp(z))
    return std::exp(-std::exp(key_order));
}

double BufferEntry::weight() const { return std::exp(log_weight); }

SampleBuffer::SampleBuffer(SampleLabel label, std::size_t capacity)
    : label_(label), capacity_(capacity) {
    if (capacity_ < 1) {
        throw InputError("sample buffer capacity must be >= 1");
    }
}

std::size_t SampleBuffer::min_key_index() const {
    if (entries_.empty()) {
        throw InputError("min_key_entry on an empty buffer");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        const BufferEntry& e = entries_[i];
        const BufferEntry& b = entries_[best];
        // Smallest key k is the largest z.
        if (e.key_order > b.key_order ||
            (e.key_order == b.key_order && e.entry_id < b.entry_id)) {
            best = i;
        }
    }
    return best;
}

const BufferEntry& SampleBuffer::min_key_entry() const { return entries_[min_key_index()]; }

std::size_t SampleBuffer::index_of(std::uint64_t entry_id) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].entry_id == entry_id) return i;
    }
    throw InputError("unknown buffer entry id");
}

InsertResult SampleBuffer::insert(const Vec& sample, std::int64_t frame_index,
                                  const SamplerConfig& cfg, Rng& rng) {
    return insert_with_uniform(sample, frame_index, cfg, open_unit(rng));
}

InsertResult SampleBuffer::insert_with_uniform(const Vec& sample, std::int64_t frame_index,
                                               const SamplerConfig& cfg, double u) {
    cfg.validate();
    if (!(u > 0.0 && u < 1.0)) {
        throw InputError("reservoir uniform draw must lie in (0, 1)");
    }
    if (frame_index < last_frame_) {
        throw InputError("frame indices must be non-decreasing across inserts");
    }
    if (!entries_.empty()) {
        require_same_size(sample.size(), entries_.front().sample.size(), "buffer sample");
    }
    last_frame_ = frame_index;

    BufferEntry entry;
    entry.sample = sample;
    entry.frame_index = frame_index;
    entry.log_weight = static_cast<double>(frame_index) * std::log(cfg.q_factor);
    entry.key_order = std::log(-std::log(u)) - entry.log_weight;
    entry.entry_id = next_id_++;

    InsertResult result;
    const std::size_t limit = std::min(capacity_, cfg.capacity);
    if (entries_.size() < limit) {
        result.kind = InsertResult::Kind::Appended;
        result.entry_id = entry.entry_id;
        entries_.push_back(std::move(entry));
        return result;
    }

    const std::size_t victim = min_key_index();
    if (entry.key_order < entries_[victim].key_order) {
        result.kind = InsertResult::Kind::Replaced;
        result.evicted = std::move(entries_[victim]);
        result.entry_id = entry.entry_id;
        entries_[victim] = std::move(entry);
    } else {
        result.kind = InsertResult::Kind::Rejected;
        result.evicted = std::move(entry);
    }
    return result;
}

std::vector<Triplet> generate_triplets(const SampleBuffer& fg, const SampleBuffer& bg,
                                       const Vec& anchor, SampleLabel anchor_label,
                                       std::size_t count, Rng& rng) {
    std::vector<Triplet> out;
    if (fg.empty() || bg.empty() || count == 0) {
        return out;
    }
    const SampleBuffer& same = anchor_label == SampleLabel::Foreground ? fg : bg;
    const SampleBuffer& other = anchor_label == SampleLabel::Foreground ? bg : fg;
    std::uniform_int_distribution<std::size_t> pick_same(0, same.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, other.size() - 1);
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t p = pick_same(rng);
        const std::size_t n = pick_other(rng);
        out.push_back({anchor, same.entries()[p].sample, other.entries()[n].sample});
    }
    return out;
}

double weighted_empirical_loss(const MetricMatrix& metric, const Vec& anchor,
                               std::span<const WeightedSample> same_class,
                               std::span<const WeightedSample> other_class) {
    if (same_class.empty() || other_class.empty()) {
        throw InputError("weighted_empirical_loss needs both classes non-empty");
    }
    double same_total = 0.0;
    for (const auto& s : same_class) same_total += s.weight;
    double other_total = 0.0;
    for (const auto& s : other_class) other_total += s.weight;
    if (!(same_total > 0.0) || !(other_total > 0.0)) {
        throw InputError("sample weights must be positive");
    }

    // Precompute the per-sample distances; the pair loss only needs their difference.
    std::vector<double> d_other(other_class.size());
    for (std::size_t j = 0; j < other_class.size(); ++j) {
        d_other[j] = mahalanobis(metric, anchor, other_class[j].sample);
    }
    double total = 0.0;
    for (const auto& pos : same_class) {
        const double d_pos = mahalanobis(metric, anchor, pos.sample);
        double inner = 0.0;
        for (std::size_t j = 0; j < other_class.size(); ++j) {
            inner += other_class[j].weight / other_total * std::max(0.0, 1.0 + d_pos - d_other[j]);
        }
        total += pos.weight / same_total * inner;
    }
    return total;
}

}  // namespace metrack
