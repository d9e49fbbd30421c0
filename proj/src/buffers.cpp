#include "igasil/buffers.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace igasil {

double discounted_return(std::span<const double> rewards, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

Trajectory::Trajectory(std::vector<Transition> transitions, double gamma)
    : steps_(std::move(transitions)), gamma_(gamma) {
  for (std::size_t i = 0; i + 1 < steps_.size(); ++i)
    if (steps_[i].done) throw std::invalid_argument("Trajectory: only the final transition may be terminal");
  const auto r = rewards();
  return_ = igasil::discounted_return(r, gamma_);
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r;
  r.reserve(steps_.size());
  for (const auto& t : steps_) r.push_back(t.reward);
  return r;
}

Trajectory Trajectory::segment(std::size_t first, std::size_t last) const {
  if (first > last || last >= steps_.size()) throw std::out_of_range("Trajectory::segment: bad bounds");
  return Trajectory(std::vector<Transition>(steps_.begin() + static_cast<std::ptrdiff_t>(first),
                                            steps_.begin() + static_cast<std::ptrdiff_t>(last) + 1),
                    gamma_);
}

// ----------------------------------------------------------------- RingReplay

RingReplay::RingReplay(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("RingReplay capacity must be positive");
  storage_.reserve(std::min<std::size_t>(capacity, 1u << 16));
}

void RingReplay::push(Transition t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[write_cursor_] = std::move(t);
  }
  write_cursor_ = (write_cursor_ + 1) % capacity_;
}

const Transition& RingReplay::at(std::size_t i) const {
  if (i >= storage_.size()) throw std::out_of_range("RingReplay::at");
  if (storage_.size() < capacity_) return storage_[i];
  return storage_[(write_cursor_ + i) % capacity_];
}

std::vector<Transition> RingReplay::sample_uniform(std::size_t batch, std::mt19937_64& rng) const {
  if (storage_.empty()) throw std::logic_error("RingReplay::sample_uniform on an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(storage_[pick(rng)]);
  return out;
}

// ------------------------------------------------------------- segments

std::size_t subtrajectory_candidates(std::size_t len) { return len * (len + 1) / 2; }

std::vector<SegmentBounds> sample_segments(std::size_t len, std::size_t n, std::mt19937_64& rng) {
  std::vector<SegmentBounds> out;
  if (len == 0) return out;
  const std::size_t want = std::min(n, subtrajectory_candidates(len));
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::uniform_int_distribution<std::size_t> start_dist(0, len - 1);
  while (out.size() < want) {
    const std::size_t first = start_dist(rng);
    std::uniform_int_distribution<std::size_t> end_dist(first, len - 1);
    const std::size_t last = end_dist(rng);
    if (seen.emplace(first, last).second) out.push_back({first, last});
  }
  return out;
}

// --------------------------------------------------------- SubCurriculumReplay

namespace {

// Min-heap order on (priority, seq): the root is the lowest return, oldest
// first among equal returns.
bool heap_less(const SubCurriculumReplay::Entry& a, const SubCurriculumReplay::Entry& b) {
  if (a.priority != b.priority) return a.priority > b.priority;
  return a.seq > b.seq;
}

}  // namespace

SubCurriculumReplay::SubCurriculumReplay(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("SubCurriculumReplay capacity must be positive");
  heap_.reserve(capacity);
}

bool SubCurriculumReplay::offer(Trajectory traj) {
  if (traj.empty()) throw std::invalid_argument("SubCurriculumReplay::offer: empty trajectory");
  Entry e{traj.discounted_return(), next_seq_++, std::move(traj)};
  if (heap_.size() < capacity_) {
    total_transitions_ += e.trajectory.size();
    heap_.push_back(std::move(e));
    std::push_heap(heap_.begin(), heap_.end(), heap_less);
    index_dirty_ = true;
    return true;
  }
  // The newcomer has the largest seq, so it wins ties on priority.
  if (e.priority < heap_.front().priority) return false;
  std::pop_heap(heap_.begin(), heap_.end(), heap_less);
  total_transitions_ -= heap_.back().trajectory.size();
  total_transitions_ += e.trajectory.size();
  heap_.back() = std::move(e);
  std::push_heap(heap_.begin(), heap_.end(), heap_less);
  index_dirty_ = true;
  return true;
}

void SubCurriculumReplay::insert(const Trajectory& traj, std::size_t n_subs, std::mt19937_64& rng) {
  if (traj.empty()) throw std::invalid_argument("SubCurriculumReplay::insert: empty trajectory");
  offer(traj);
  for (const auto& seg : sample_segments(traj.size(), n_subs, rng)) offer(traj.segment(seg.first, seg.last));
}

void SubCurriculumReplay::rebuild_index() const {
  cumulative_.resize(heap_.size());
  std::size_t acc = 0;
  for (std::size_t i = 0; i < heap_.size(); ++i) cumulative_[i] = (acc += heap_[i].trajectory.size());
  index_dirty_ = false;
}

std::optional<std::vector<Transition>> SubCurriculumReplay::sample_pairs(std::size_t batch,
                                                                         std::mt19937_64& rng) const {
  if (total_transitions_ == 0) return std::nullopt;
  if (index_dirty_) rebuild_index();
  std::uniform_int_distribution<std::size_t> pick(0, total_transitions_ - 1);
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t k = pick(rng);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), k);
    const auto entry = static_cast<std::size_t>(it - cumulative_.begin());
    const std::size_t offset = k - (entry == 0 ? 0 : cumulative_[entry - 1]);
    out.push_back(heap_[entry].trajectory.transitions()[offset]);
  }
  return out;
}

std::vector<double> SubCurriculumReplay::stored_returns() const {
  std::vector<double> r;
  r.reserve(heap_.size());
  for (const auto& e : heap_) r.push_back(e.priority);
  return r;
}

std::optional<double> SubCurriculumReplay::min_return() const {
  if (heap_.empty()) return std::nullopt;
  return heap_.front().priority;
}

std::optional<double> SubCurriculumReplay::max_return() const {
  if (heap_.empty()) return std::nullopt;
  double m = heap_.front().priority;
  for (const auto& e : heap_) m = std::max(m, e.priority);
  return m;
}

std::optional<double> SubCurriculumReplay::mean_return() const {
  if (heap_.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& e : heap_) s += e.priority;
  return s / static_cast<double>(heap_.size());
}

bool SubCurriculumReplay::heap_property_holds() const {
  return std::is_heap(heap_.begin(), heap_.end(), heap_less);
}

}  // namespace igasil
