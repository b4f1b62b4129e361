#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "walklm/graph.hpp"
#include "walklm/walk.hpp"

namespace walklm {

using TokenId = int32_t;

// Feature value -> token text:
//   categorical "UDP"      -> "[ef:UDP]"
//   count n <= 100         -> "[ef:n]" exactly
//   count n > 100          -> "[ef:10^e]", smallest e with 10^e >= n
//   ratio r >= 1           -> integer-cast, then the count rule
//   ratio r < 1            -> "[ef:0.xx]", two decimals truncated
// Timestamps are never tokenized; they only constrain walk sampling.
std::string feature_token(const FeatureValue& v);

// Fixed token inventory for one graph: [PAD]=0, [MASK]=1, [CLS]=2, then one
// node token per node id ascending, then the graph's distinct feature tokens
// in lexicographic order. A feature value outside the inventory is an error
// at lookup time, not a silent OOV bucket.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kMask = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kFirstNode = 3;

  static Vocabulary build(const TemporalGraph& g);

  TokenId size() const { return static_cast<TokenId>(tokens_.size()); }
  uint32_t num_nodes() const { return num_nodes_; }

  TokenId node_token(NodeId n) const;
  bool is_node_token(TokenId id) const {
    return id >= kFirstNode && id < kFirstNode + static_cast<TokenId>(num_nodes_);
  }
  NodeId node_of(TokenId id) const;

  // Id of a feature token string; throws if the value never occurred in the
  // graph the vocabulary was built from.
  TokenId feature_token_id(const std::string& tok) const;

  const std::string& token_text(TokenId id) const;

  // FNV-1a over the token list; checkpoints embed this to refuse scoring
  // against the wrong vocabulary.
  uint64_t hash() const;

  // Text format: one token per line, id = line number.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  uint32_t num_nodes_ = 0;

  void build_index();
  void validate() const;
};

// Token ids for one feature vector (throws on unseen values).
std::vector<TokenId> tokenize_features(const FeatureValue* feats, size_t n, const Vocabulary& v);

// Walk -> token sequence: start node token, then per hop the edge's feature
// tokens followed by the destination node token; a stuck hop contributes
// only the repeated node token. Output is cut at token_budget without ever
// splitting a (features, node) unit, so it always ends on a node token.
std::vector<TokenId> tokenize_walk(const Walk& w, const TemporalGraph& g, const Vocabulary& v,
                                   int token_budget);

// Precomputed per-edge feature token ids for the training hot path; assembly
// through this table is exactly equivalent to tokenize_walk.
class EdgeTokenTable {
 public:
  EdgeTokenTable() = default;
  EdgeTokenTable(const TemporalGraph& g, const Vocabulary& v);
  const TokenId* row(uint64_t e) const { return ids_.data() + e * arity_; }
  uint16_t arity() const { return arity_; }

 private:
  std::vector<TokenId> ids_;
  uint16_t arity_ = 0;
};

std::vector<TokenId> assemble_walk_tokens(const Walk& w, const EdgeTokenTable& table,
                                          const Vocabulary& v, int token_budget);

}  // namespace walklm
