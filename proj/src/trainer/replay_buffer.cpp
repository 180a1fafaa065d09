#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {

ReplayBuffer::ReplayBuffer(std::size_t capacity_steps) : capacity_(capacity_steps) {
  if (capacity_ < 1) throw ConfigError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::begin_episode() {
  if (!episodes_.empty() && episodes_.back().empty()) return;
  episodes_.emplace_back();
}

void ReplayBuffer::add(StepRecord record) {
  if (episodes_.empty()) episodes_.emplace_back();
  episodes_.back().push_back(std::move(record));
  ++steps_;
  evict();
}

void ReplayBuffer::evict() {
  // Drop whole episodes from the front, never the one being written.
  while (steps_ > capacity_ && episodes_.size() > 1) {
    steps_ -= episodes_.front().size();
    episodes_.pop_front();
  }
}

SequenceBatch ReplayBuffer::sample_sequences(std::size_t batch, std::size_t length,
                                             Rng& rng) const {
  if (batch < 1 || length < 1) throw ConfigError("sample_sequences: B and T must be >= 1");
  std::size_t windows = 0;
  for (const auto& ep : episodes_) {
    if (ep.size() >= length) windows += ep.size() - length + 1;
  }
  if (windows == 0) {
    throw NotReady("replay buffer holds no episode with " + std::to_string(length) + " steps");
  }
  SequenceBatch out;
  out.obs.resize(batch);
  out.actions.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t pick = rng.index(windows);
    for (const auto& ep : episodes_) {
      if (ep.size() < length) continue;
      const std::size_t here = ep.size() - length + 1;
      if (pick >= here) {
        pick -= here;
        continue;
      }
      for (std::size_t t = 0; t < length; ++t) {
        out.obs[b].push_back(ep[pick + t].obs);
        out.actions[b].push_back(ep[pick + t].action);
      }
      break;
    }
  }
  return out;
}

}  // namespace hamworld
