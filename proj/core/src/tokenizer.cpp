#include "walklm/tokenizer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace walklm {

namespace {

// Smallest e with 10^e >= n, for n > 100. Integer arithmetic on purpose:
// ceil(log10(n)) through doubles mis-bins exact powers of ten.
int pow10_ceil_exponent(uint64_t n) {
  uint64_t p = 1000;
  int e = 3;
  while (p < n) {
    if (p > UINT64_MAX / 10) return e + 1;  // n > 10^19; 10^20 covers all of uint64
    p *= 10;
    ++e;
  }
  return e;
}

std::string count_token(uint64_t n) {
  if (n <= 100) return "[ef:" + std::to_string(n) + "]";
  return "[ef:10^" + std::to_string(pow10_ceil_exponent(n)) + "]";
}

}  // namespace

std::string feature_token(const FeatureValue& v) {
  switch (v.kind) {
    case FeatureKind::categorical:
      return "[ef:" + v.cat + "]";
    case FeatureKind::count:
      return count_token(v.count);
    case FeatureKind::ratio: {
      double r = v.ratio;
      if (r < 0.0) throw std::runtime_error("ratio feature must be non-negative");
      if (r >= 1.0) return count_token(static_cast<uint64_t>(r));
      // Two-decimal truncation. The 1e-9 nudge snaps values that are exact
      // hundredths up from their IEEE representation (0.29 is stored a hair
      // below 0.29 and must not truncate to "0.28"); genuine truncation like
      // 0.5687 -> "0.56" is unaffected. Clamp covers r within 1e-9 of 1.
      int hundredths = std::min(static_cast<int>((r + 1e-9) * 100.0), 99);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "[ef:0.%02d]", hundredths);
      return buf;
    }
  }
  throw std::runtime_error("unknown feature kind");
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::build(const TemporalGraph& g) {
  Vocabulary v;
  v.num_nodes_ = g.num_nodes();
  v.tokens_ = {"[PAD]", "[MASK]", "[CLS]"};
  v.tokens_.reserve(3 + g.num_nodes());
  for (uint32_t n = 0; n < g.num_nodes(); ++n) v.tokens_.push_back("[nid:" + std::to_string(n) + "]");

  std::set<std::string> feats;  // ordered: the vocabulary is lexicographic by contract
  for (uint64_t e = 0; e < g.num_edges(); ++e)
    for (uint16_t k = 0; k < g.arity(); ++k) feats.insert(feature_token(g.edge_feats(e)[k]));
  for (const std::string& t : feats) v.tokens_.push_back(t);

  v.build_index();
  return v;
}

void Vocabulary::build_index() {
  index_.clear();
  index_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw std::runtime_error("duplicate token '" + tokens_[i] + "' in vocabulary");
  }
}

TokenId Vocabulary::node_token(NodeId n) const {
  if (n >= num_nodes_)
    throw std::runtime_error("node id " + std::to_string(n) + " outside vocabulary");
  return kFirstNode + static_cast<TokenId>(n);
}

NodeId Vocabulary::node_of(TokenId id) const {
  if (!is_node_token(id))
    throw std::runtime_error("token id " + std::to_string(id) + " is not a node token");
  return static_cast<NodeId>(id - kFirstNode);
}

TokenId Vocabulary::feature_token_id(const std::string& tok) const {
  auto it = index_.find(tok);
  if (it == index_.end())
    throw std::runtime_error("vocabulary has no token '" + tok +
                             "': feature value never occurred in the training graph");
  return it->second;
}

const std::string& Vocabulary::token_text(TokenId id) const {
  if (id < 0 || id >= size()) throw std::runtime_error("token id out of range");
  return tokens_[static_cast<size_t>(id)];
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (const std::string& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const std::string& t : tokens_) os << t << '\n';
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open vocabulary file '" + path + "'");
  Vocabulary v;
  std::string line;
  while (std::getline(is, line)) v.tokens_.push_back(line);
  v.validate();
  v.build_index();
  return v;
}

void Vocabulary::validate() const {
  if (tokens_.size() < 3 || tokens_[0] != "[PAD]" || tokens_[1] != "[MASK]" || tokens_[2] != "[CLS]")
    throw std::runtime_error("vocabulary file must start with [PAD], [MASK], [CLS]");
  // Contiguous node block, ids in order, starting right after the specials.
  size_t i = 3;
  uint32_t n = 0;
  while (i < tokens_.size() && tokens_[i] == "[nid:" + std::to_string(n) + "]") {
    ++i;
    ++n;
  }
  const_cast<Vocabulary*>(this)->num_nodes_ = n;
  for (size_t j = i; j < tokens_.size(); ++j) {
    if (tokens_[j].rfind("[nid:", 0) == 0)
      throw std::runtime_error("vocabulary node tokens must form one contiguous ascending block");
    if (j > i && !(tokens_[j - 1] < tokens_[j]))
      throw std::runtime_error("vocabulary feature tokens must be strictly lexicographically sorted");
  }
}

// ---------------------------------------------------------------------------
// walk tokenization

std::vector<TokenId> tokenize_features(const FeatureValue* feats, size_t n, const Vocabulary& v) {
  std::vector<TokenId> out;
  out.reserve(n);
  for (size_t k = 0; k < n; ++k) out.push_back(v.feature_token_id(feature_token(feats[k])));
  return out;
}

namespace {

// Shared assembly: `edge_tokens(step, out)` appends the feature token ids of
// the walk's step-th edge. Units are (feature tokens, node token) per hop —
// just the node token when stuck — and a unit that would overflow the budget
// ends the sequence.
template <typename EdgeTokensFn>
std::vector<TokenId> assemble(const Walk& w, const Vocabulary& v, int token_budget,
                              EdgeTokensFn&& edge_tokens) {
  if (token_budget < 1) throw std::runtime_error("token budget must be positive");
  if (w.nodes.empty()) throw std::runtime_error("cannot tokenize an empty walk");
  if (w.edge_indices.size() + 1 != w.nodes.size())
    throw std::runtime_error("walk has inconsistent node/edge counts");

  std::vector<TokenId> out;
  out.reserve(static_cast<size_t>(token_budget));
  out.push_back(v.node_token(w.nodes[0]));

  std::vector<TokenId> unit;
  for (size_t step = 0; step < w.edge_indices.size(); ++step) {
    unit.clear();
    if (w.edge_indices[step] != kStuck) edge_tokens(step, unit);
    unit.push_back(v.node_token(w.nodes[step + 1]));
    if (out.size() + unit.size() > static_cast<size_t>(token_budget)) break;
    out.insert(out.end(), unit.begin(), unit.end());
  }
  return out;
}

}  // namespace

std::vector<TokenId> tokenize_walk(const Walk& w, const TemporalGraph& g, const Vocabulary& v,
                                   int token_budget) {
  return assemble(w, v, token_budget, [&](size_t step, std::vector<TokenId>& unit) {
    uint64_t e = static_cast<uint64_t>(w.edge_indices[step]);
    if (e >= g.num_edges()) throw std::runtime_error("walk references an edge outside the graph");
    for (uint16_t k = 0; k < g.arity(); ++k)
      unit.push_back(v.feature_token_id(feature_token(g.edge_feats(e)[k])));
  });
}

EdgeTokenTable::EdgeTokenTable(const TemporalGraph& g, const Vocabulary& v) : arity_(g.arity()) {
  ids_.resize(g.num_edges() * g.arity());
  for (uint64_t e = 0; e < g.num_edges(); ++e)
    for (uint16_t k = 0; k < g.arity(); ++k)
      ids_[e * arity_ + k] = v.feature_token_id(feature_token(g.edge_feats(e)[k]));
}

std::vector<TokenId> assemble_walk_tokens(const Walk& w, const EdgeTokenTable& table,
                                          const Vocabulary& v, int token_budget) {
  return assemble(w, v, token_budget, [&](size_t step, std::vector<TokenId>& unit) {
    const TokenId* row = table.row(static_cast<uint64_t>(w.edge_indices[step]));
    unit.insert(unit.end(), row, row + table.arity());
  });
}

}  // namespace walklm
