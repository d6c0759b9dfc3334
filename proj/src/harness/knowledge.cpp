#include "pufkex/harness/knowledge.hpp"

#include <algorithm>

#include "pufkex/protocol/messages.hpp"

namespace pufkex::harness {
namespace {

std::optional<std::size_t> leading_bit(const Word256& w) {
  const auto& b = w.bytes();
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b[i] != 0) return i * 8 + static_cast<std::size_t>(__builtin_clz(b[i]) - 24);
  return std::nullopt;
}

}  // namespace

Word256 XorSpan::reduce(Word256 w) const {
  for (const Row& row : basis_)
    if (w.bit(row.pivot)) w ^= row.value;
  return w;
}

bool XorSpan::add(Word256 w) {
  w = reduce(w);
  const auto pivot = leading_bit(w);
  if (!pivot) return false;
  // Keep the basis fully reduced so reduce() is a single pass.
  for (Row& row : basis_)
    if (row.value.bit(*pivot)) row.value ^= w;
  const auto at = std::lower_bound(basis_.begin(), basis_.end(), *pivot,
                                   [](const Row& r, std::size_t p) { return r.pivot < p; });
  basis_.insert(at, Row{*pivot, w});
  return true;
}

bool XorSpan::contains(Word256 w) const { return reduce(w).is_zero(); }

std::vector<HashRecipe> protocol_recipes(const SessionTruth& t) {
  std::vector<HashRecipe> out;
  const auto add = [&](std::string name, std::vector<std::optional<Word256>> in,
                       std::vector<DeviceId> ids) {
    std::vector<Word256> words;
    std::vector<HashField> fields;
    for (const auto& w : in) {
      if (!w) return;
      words.push_back(*w);
      fields.emplace_back(*w);
    }
    for (DeviceId id : ids) fields.emplace_back(id);
    out.push_back(HashRecipe{std::move(name), std::move(words), std::move(ids), hash_fields(fields)});
  };
  const auto mix = [](const std::optional<Word256>& a, const std::optional<Word256>& b) {
    return a && b ? std::optional(*a ^ *b) : std::nullopt;
  };

  add("H(T1,T2)", {t.t1, t.t2}, {});
  add("M4", {t.t1, t.t2, t.rp, t.cp, t.alias}, {});
  add("M6", {mix(t.cp_new, t.rp), t.rp}, {});
  add("M8", {mix(t.t2, t.rp_new), t.t2}, {});
  add("M9", {t.cp_new, t.rp_new}, {});
  auto m9 = t.m9;
  if (!m9 && t.cp_new && t.rp_new) m9 = hash_fields({*t.cp_new, *t.rp_new});
  add("M11", {mix(t.nc, m9), m9}, {});
  add("M13", {mix(t.np, t.nc), t.nc}, {});
  add("key", {t.nc, t.np, t.alias}, {t.device_id});
  return out;
}

Word256 identity_word(DeviceId device_id, DeviceId client_id) {
  Word256::Array a{};
  const auto p = device_id.to_bytes();
  const auto c = client_id.to_bytes();
  std::copy(p.begin(), p.end(), a.begin());
  std::copy(c.begin(), c.end(), a.begin() + 4);
  return Word256(a);
}

std::vector<Word256> frame_words(ByteView frame) {
  protocol::Frame decoded;
  try {
    decoded = protocol::decode(frame);
  } catch (const std::exception&) {
    return {};
  }
  return std::visit(
      [](const auto& m) -> std::vector<Word256> {
        using T = std::decay_t<decltype(m)>;
        using namespace protocol;
        if constexpr (std::is_same_v<T, ConnReq>) return {identity_word(DeviceId{}, m.client_id)};
        else if constexpr (std::is_same_v<T, ConnEstablish>) return {identity_word(m.device_id, m.client_id)};
        else if constexpr (std::is_same_v<T, AuthChallenge>) return {m.m1, m.m2, m.m3, m.m4, m.challenge};
        else if constexpr (std::is_same_v<T, CrpRotate>) return {m.m5, m.m6, m.m7, m.m8};
        else if constexpr (std::is_same_v<T, RotateAck>) return {m.m9};
        else if constexpr (std::is_same_v<T, ClientNonce>) return {m.m10, m.m11};
        else return {m.m12, m.m13};
      },
      decoded.message);
}

void Knowledge::observe_frame(ByteView frame) {
  for (const Word256& w : frame_words(frame)) learn(w);
}

void Knowledge::close(const std::vector<HashRecipe>& recipes, int depth) {
  std::vector<bool> done(recipes.size(), false);
  for (int layer = 0; layer < depth; ++layer) {
    // Outputs of this layer only become inputs for the next one.
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < recipes.size(); ++i) {
      if (done[i]) continue;
      if (std::all_of(recipes[i].words.begin(), recipes[i].words.end(),
                      [&](const Word256& w) { return knows(w); }))
        ready.push_back(i);
    }
    if (ready.empty()) return;
    for (std::size_t i : ready) {
      done[i] = true;
      learn(recipes[i].output);
      derived_.push_back(recipes[i].name);
    }
  }
}

}  // namespace pufkex::harness
