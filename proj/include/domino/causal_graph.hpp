#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "domino/detector.hpp"

namespace domino {

enum class NodeKind : std::uint8_t { CAUSE, INTERMEDIATE, CONSEQUENCE };

const char* to_string(NodeKind k);

/// How a node's event selector is derived from the media direction under
/// analysis.
enum class Binding : std::uint8_t {
    NONE,           // event takes no selector
    DIR_PATH,       // media direction, or its opposite on a flipped path
    SIDE_SENDER,    // media sender's app log
    SIDE_RECEIVER,  // media receiver's app log
    SIDE_LOCAL,
    SIDE_REMOTE,
    DIR_UL,
    DIR_DL,
};

const char* to_string(Binding b);

struct CausalNode {
    std::string id;
    NodeKind kind = NodeKind::INTERMEDIATE;
    std::string event;
    Binding binding = Binding::NONE;
    // A path through a flipping node runs against the media direction (the
    // feedback path), so DIR_PATH nodes on it bind to the opposite direction.
    bool flip = false;

    bool operator==(const CausalNode&) const = default;
};

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CausalGraph {
public:
    /// Throws GraphError on a duplicate id.
    void add_node(CausalNode node);
    /// Throws GraphError for unknown endpoints, edges into a cause or out of
    /// a consequence. Duplicate edges are ignored.
    void add_edge(const std::string& from, const std::string& to);

    const std::vector<CausalNode>& nodes() const { return nodes_; }
    const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
    const CausalNode* find(const std::string& id) const;
    CausalNode* find(const std::string& id);
    bool has_edge(const std::string& from, const std::string& to) const;
    std::vector<std::string> successors(const std::string& id) const;

    /// Node ids in a topological order; throws GraphError naming a node on a
    /// cycle.
    std::vector<std::string> topological_order() const;

private:
    std::vector<CausalNode> nodes_;
    std::vector<std::pair<std::string, std::string>> edges_;
};

struct ChainPath {
    std::vector<std::string> nodes;

    const std::string& cause() const { return nodes.front(); }
    const std::string& consequence() const { return nodes.back(); }
    std::string to_string() const;  // "a -> b -> c"

    auto operator<=>(const ChainPath&) const = default;
    bool operator==(const ChainPath&) const = default;
};

CausalGraph default_graph();

/// All simple cause-to-consequence paths, sorted lexicographically by node
/// ids. Throws GraphError on a cycle.
std::vector<ChainPath> enumerate_chains(const CausalGraph& g);

/// Maps an event name plus concrete selector to a feature slot.
using SlotResolver = std::function<std::optional<int>(const std::string& event, Selector sel)>;

/// Resolver for the fixed 36-slot layout.
SlotResolver builtin_resolver();

/// Concrete selector for `node` when analysing media of direction `dir`.
Selector resolve_selector(const CausalNode& node, Direction dir, bool flipped_path);

struct ChainMatch {
    Timestamp window_start;
    std::size_t chain_index = 0;  // into the matcher's chain list
    ChainPath path;
    Direction stream_dir = Direction::UL;

    const std::string& cause_id() const { return path.cause(); }
    const std::string& consequence_id() const { return path.consequence(); }
};

/// Consequence that fired in a window, with the causes of the matching
/// chains. An empty cause list means UNKNOWN.
struct Attribution {
    std::string consequence_id;
    std::vector<std::string> causes;

    bool unknown() const { return causes.empty(); }
    bool operator==(const Attribution&) const = default;
};

/// Chains with their feature slots resolved once for both directions.
class ChainMatcher {
public:
    /// Throws GraphError when a node cannot be resolved to a slot.
    ChainMatcher(CausalGraph graph, std::vector<ChainPath> chains, const SlotResolver& resolver);

    const CausalGraph& graph() const { return graph_; }
    const std::vector<ChainPath>& chains() const { return chains_; }
    const std::vector<int>& slots(std::size_t chain, Direction dir) const;

    /// Indices of chains whose every node bit is set.
    std::vector<std::size_t> matching(const FeatureVector& fv, Direction dir) const;
    /// As matching(), additionally requiring non-decreasing onsets along the
    /// path.
    std::vector<std::size_t> matching_strict(const FeatureVector& fv,
                                             const std::vector<std::optional<Timestamp>>& onsets,
                                             Direction dir) const;

    std::vector<ChainMatch> match(const FeatureVector& fv, Direction dir, Timestamp window_start = {}) const;

    /// One record per consequence node whose bit is set, in node order.
    std::vector<Attribution> attribute(const FeatureVector& fv, Direction dir,
                                       const std::vector<std::size_t>& matched) const;
    std::vector<Attribution> attribute(const FeatureVector& fv, Direction dir) const;

private:
    CausalGraph graph_;
    std::vector<ChainPath> chains_;
    std::vector<std::vector<int>> slots_[2];
    std::vector<std::pair<std::string, int>> consequence_slots_[2];
};

/// Matches against the built-in layout with all enumerated chains of `g`.
std::vector<ChainMatch> match(const FeatureVector& fv, const CausalGraph& g, Direction dir);
std::vector<Attribution> attribute(const FeatureVector& fv, const CausalGraph& g, Direction dir);

}  // namespace domino
