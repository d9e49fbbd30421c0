#pragma once

// Per-agent memories: a FIFO ring replay and the sub-curriculum replay, a
// capacity-k min-heap of the best (sub-)trajectories seen so far.

#include "igasil/net.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace igasil {

/// One agent-local step. Discrete actions keep their index in
/// `action_index` and a one-hot encoding in `action`; continuous actions
/// leave `action_index` at -1.
struct Transition {
  Vec obs;
  Vec action;
  int action_index = -1;
  double reward = 0.0;
  Vec next_obs;
  bool done = false;
  std::optional<double> behavior_logp;
};

/// sum_t gamma^t r_t; zero for an empty sequence.
double discounted_return(std::span<const double> rewards, double gamma);

class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<Transition> transitions, double gamma);

  const std::vector<Transition>& transitions() const { return steps_; }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  double discounted_return() const { return return_; }
  double gamma() const { return gamma_; }
  std::vector<double> rewards() const;

  /// Contiguous segment [first, last]; its return is discounted from `first`.
  Trajectory segment(std::size_t first, std::size_t last) const;

 private:
  std::vector<Transition> steps_;
  double gamma_ = 1.0;
  double return_ = 0.0;
};

class RingReplay {
 public:
  explicit RingReplay(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }
  /// i-th element in insertion order, oldest first.
  const Transition& at(std::size_t i) const;
  /// Uniform with replacement. Throws std::logic_error on an empty buffer.
  std::vector<Transition> sample_uniform(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t write_cursor_ = 0;
};

/// Number of distinct contiguous segments of a length-`len` sequence.
std::size_t subtrajectory_candidates(std::size_t len);

/// Segment bounds [first, last] (inclusive).
struct SegmentBounds {
  std::size_t first;
  std::size_t last;
  friend bool operator==(const SegmentBounds&, const SegmentBounds&) = default;
};

/// Draws min(n, candidates) pairwise distinct segments: start uniform over
/// positions, end uniform over [start, len-1], rejecting repeats.
std::vector<SegmentBounds> sample_segments(std::size_t len, std::size_t n, std::mt19937_64& rng);

class SubCurriculumReplay {
 public:
  struct Entry {
    double priority;
    std::uint64_t seq;
    Trajectory trajectory;
  };

  explicit SubCurriculumReplay(std::size_t capacity);

  /// Offers one item. Returns true if it was stored.
  bool offer(Trajectory traj);
  /// The full trajectory, then min(n_subs, candidates) distinct segments.
  void insert(const Trajectory& traj, std::size_t n_subs, std::mt19937_64& rng);

  /// Uniform over all stored transitions; nullopt while empty ("not ready").
  std::optional<std::vector<Transition>> sample_pairs(std::size_t batch, std::mt19937_64& rng) const;

  std::size_t size() const { return heap_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t transition_count() const { return total_transitions_; }
  bool empty() const { return heap_.empty(); }
  std::uint64_t offers() const { return next_seq_; }
  const std::vector<Entry>& entries() const { return heap_; }
  std::vector<double> stored_returns() const;
  std::optional<double> min_return() const;
  std::optional<double> max_return() const;
  std::optional<double> mean_return() const;
  bool heap_property_holds() const;

 private:
  void rebuild_index() const;

  std::size_t capacity_;
  std::vector<Entry> heap_;
  std::uint64_t next_seq_ = 0;
  std::size_t total_transitions_ = 0;
  mutable std::vector<std::size_t> cumulative_;
  mutable bool index_dirty_ = true;
};

}  // namespace igasil
