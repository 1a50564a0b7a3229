#include "nscb/history.hpp"

#include <cmath>
#include <cstdio>

#include "nscb/errors.hpp"

namespace nscb {

void History::append(RoundRecord rec) {
  if (rec.t != size() + 1) throw InputError("round records must be appended in order");
  if (rec.x < 0 || rec.x >= num_contexts_) throw InputError("round record: context out of range");
  if (rec.a < 0 || rec.a >= K_) throw InputError("round record: action out of range");
  if (static_cast<int>(rec.p.p.size()) != K_)
    throw InputError("round record: action distribution has wrong length");
  double sum = 0.0;
  for (double v : rec.p.p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("round record: bad probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InputError("round record: action distribution does not sum to 1");
  if (!(rec.p.p[rec.a] > 0.0))
    throw InputError("round record: chosen action has zero probability");
  if (!std::isfinite(rec.observed_reward))
    throw InputError("round record: reward not finite");
  rounds_.push_back(std::move(rec));
}

const RoundRecord& History::at(std::int64_t t) const {
  if (t < 1 || t > size()) throw StateError("round index outside recorded history");
  return rounds_[static_cast<std::size_t>(t - 1)];
}

void History::check_interval(Interval I) const {
  if (I.s < 1 || I.e > size() || I.s > I.e)
    throw StateError("interval outside recorded history");
}

const IntervalStats& History::stats(Interval I) const {
  check_interval(I);
  auto key = std::make_pair(I.s, I.e);
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;

  auto st = std::make_unique<IntervalStats>();
  st->I = I;
  st->num_contexts = num_contexts_;
  st->K = K_;
  st->ctx_count.assign(num_contexts_, 0);
  st->ips.assign(static_cast<std::size_t>(num_contexts_) * K_, 0.0);
  for (std::int64_t t = I.s; t <= I.e; ++t) {
    const RoundRecord& r = rounds_[static_cast<std::size_t>(t - 1)];
    st->ctx_count[r.x] += 1;
    st->ips[static_cast<std::size_t>(r.x) * K_ + r.a] += r.observed_reward / r.p.p[r.a];
  }
  const IntervalStats& ref = *st;
  cache_.emplace(key, std::move(st));
  return ref;
}

void write_rounds_csv(const History& h, std::ostream& os) {
  os << "t,epoch,block,replay_indices,x,a,p_a,reward\n";
  char buf[64];
  for (std::int64_t t = 1; t <= h.size(); ++t) {
    const RoundRecord& r = h.at(t);
    os << r.t << ',' << r.epoch << ',' << r.block << ',';
    for (std::size_t k = 0; k < r.replay_indices.size(); ++k) {
      if (k) os << '|';
      os << r.replay_indices[k];
    }
    os << ',' << r.x << ',' << r.a << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.p.p[r.a]);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.observed_reward);
    os << buf << '\n';
  }
}

}  // namespace nscb
