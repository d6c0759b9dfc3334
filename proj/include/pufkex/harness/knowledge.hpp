#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pufkex/crypto.hpp"

namespace pufkex::harness {

/// Linear span over GF(2)^256 of everything added so far.
class XorSpan {
 public:
  /// Returns false when `w` was already in the span.
  bool add(Word256 w);
  bool contains(Word256 w) const;
  std::size_t rank() const noexcept { return basis_.size(); }

 private:
  Word256 reduce(Word256 w) const;

  struct Row {
    std::size_t pivot;  // index of the row's leading set bit
    Word256 value;
  };
  std::vector<Row> basis_;  // pivots strictly increasing
};

/// Ground-truth values of one handshake, filled in as far as it got.
struct SessionTruth {
  DeviceId device_id;
  std::optional<Word256> rp, cp, t1, t2, alias;
  std::optional<Word256> cp_new, rp_new, m9, nc, np, key;
};

/// One hash the protocol computes: output = H(words..., ids...).
/// The ids are public and never constrain derivability.
struct HashRecipe {
  std::string name;
  std::vector<Word256> words;
  std::vector<DeviceId> ids;
  Word256 output;
};

/// Every hash the protocol evaluates during the session, with the inputs the
/// truth record makes available.
std::vector<HashRecipe> protocol_recipes(const SessionTruth& truth);

/// Adversary knowledge: closed under XOR, plus up to `depth` layers of hashing
/// restricted to the recipes supplied.
class Knowledge {
 public:
  void learn(const Word256& w) { span_.add(w); }
  /// Learns every Word256 field of a frame and a word holding its ids.
  /// Undecodable frames teach nothing.
  void observe_frame(ByteView frame);
  /// Adds the output of each recipe whose inputs are all known; repeats `depth` times.
  void close(const std::vector<HashRecipe>& recipes, int depth = 2);

  bool knows(const Word256& w) const { return span_.contains(w); }
  std::size_t rank() const noexcept { return span_.rank(); }
  const std::vector<std::string>& hashes_derived() const noexcept { return derived_; }

 private:
  XorSpan span_;
  std::vector<std::string> derived_;
};

/// Id_p || Id_c in the leading bytes of an otherwise zero word.
Word256 identity_word(DeviceId device_id, DeviceId client_id);

/// Every Word256 field of a frame, ids folded into identity_word. Empty when
/// the frame does not decode.
std::vector<Word256> frame_words(ByteView frame);

}  // namespace pufkex::harness
