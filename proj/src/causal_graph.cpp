#include "domino/causal_graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace domino {

const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::CAUSE: return "cause";
        case NodeKind::INTERMEDIATE: return "intermediate";
        case NodeKind::CONSEQUENCE: return "consequence";
    }
    return "intermediate";
}

const char* to_string(Binding b) {
    switch (b) {
        case Binding::NONE: return "";
        case Binding::DIR_PATH: return "dir path";
        case Binding::SIDE_SENDER: return "side sender";
        case Binding::SIDE_RECEIVER: return "side receiver";
        case Binding::SIDE_LOCAL: return "side local";
        case Binding::SIDE_REMOTE: return "side remote";
        case Binding::DIR_UL: return "dir ul";
        case Binding::DIR_DL: return "dir dl";
    }
    return "";
}

void CausalGraph::add_node(CausalNode node) {
    if (find(node.id)) throw GraphError(fmt::format("duplicate node '{}'", node.id));
    nodes_.push_back(std::move(node));
}

void CausalGraph::add_edge(const std::string& from, const std::string& to) {
    const auto* a = find(from);
    const auto* b = find(to);
    if (!a) throw GraphError(fmt::format("edge from unknown node '{}'", from));
    if (!b) throw GraphError(fmt::format("edge to unknown node '{}'", to));
    if (a->kind == NodeKind::CONSEQUENCE)
        throw GraphError(fmt::format("consequence '{}' cannot have outgoing edges", from));
    if (b->kind == NodeKind::CAUSE) throw GraphError(fmt::format("cause '{}' cannot have incoming edges", to));
    if (from == to) throw GraphError(fmt::format("self-loop on '{}'", from));
    if (!has_edge(from, to)) edges_.emplace_back(from, to);
}

const CausalNode* CausalGraph::find(const std::string& id) const {
    for (const auto& n : nodes_)
        if (n.id == id) return &n;
    return nullptr;
}

CausalNode* CausalGraph::find(const std::string& id) {
    for (auto& n : nodes_)
        if (n.id == id) return &n;
    return nullptr;
}

bool CausalGraph::has_edge(const std::string& from, const std::string& to) const {
    return std::find(edges_.begin(), edges_.end(), std::pair{from, to}) != edges_.end();
}

std::vector<std::string> CausalGraph::successors(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [a, b] : edges_)
        if (a == id) out.push_back(b);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> CausalGraph::topological_order() const {
    std::map<std::string, int> indegree;
    for (const auto& n : nodes_) indegree[n.id] = 0;
    for (const auto& e : edges_) ++indegree[e.second];
    std::set<std::string> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0) ready.insert(id);
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (const auto& next : successors(id))
            if (--indegree[next] == 0) ready.insert(next);
    }
    if (order.size() != nodes_.size()) {
        for (const auto& [id, deg] : indegree)
            if (deg > 0) throw GraphError(fmt::format("cycle in causal graph through '{}'", id));
    }
    return order;
}

std::string ChainPath::to_string() const { return fmt::format("{}", fmt::join(nodes, " -> ")); }

CausalGraph default_graph() {
    CausalGraph g;
    auto node = [&](const char* id, NodeKind kind, Binding b, bool flip = false) {
        g.add_node({id, kind, id, b, flip});
    };
    node("poor_channel", NodeKind::CAUSE, Binding::DIR_PATH);
    node("cross_traffic", NodeKind::CAUSE, Binding::DIR_PATH);
    node("ul_scheduling", NodeKind::CAUSE, Binding::NONE);
    node("harq_retx", NodeKind::CAUSE, Binding::DIR_PATH);
    node("rlc_retx", NodeKind::CAUSE, Binding::DIR_PATH);
    node("rrc_state", NodeKind::CAUSE, Binding::NONE);
    node("tbs_drop", NodeKind::INTERMEDIATE, Binding::DIR_PATH);
    node("rate_gap", NodeKind::INTERMEDIATE, Binding::DIR_PATH);
    node("fwd_delay_up", NodeKind::INTERMEDIATE, Binding::NONE);
    node("rev_delay_up", NodeKind::INTERMEDIATE, Binding::NONE, true);
    node("outstanding_up", NodeKind::INTERMEDIATE, Binding::SIDE_SENDER);
    node("cwnd_full", NodeKind::INTERMEDIATE, Binding::SIDE_SENDER);
    node("gcc_overuse", NodeKind::INTERMEDIATE, Binding::SIDE_SENDER);
    node("jb_drain", NodeKind::CONSEQUENCE, Binding::SIDE_RECEIVER);
    node("target_bitrate_drop", NodeKind::CONSEQUENCE, Binding::SIDE_SENDER);
    node("pushback_rate_drop", NodeKind::CONSEQUENCE, Binding::SIDE_SENDER);

    g.add_edge("poor_channel", "tbs_drop");
    g.add_edge("cross_traffic", "tbs_drop");
    g.add_edge("tbs_drop", "rate_gap");
    g.add_edge("rate_gap", "fwd_delay_up");
    g.add_edge("rate_gap", "rev_delay_up");
    for (const char* cause : {"ul_scheduling", "harq_retx", "rlc_retx", "rrc_state"}) {
        g.add_edge(cause, "fwd_delay_up");
        g.add_edge(cause, "rev_delay_up");
    }
    g.add_edge("fwd_delay_up", "jb_drain");
    g.add_edge("fwd_delay_up", "gcc_overuse");
    g.add_edge("fwd_delay_up", "outstanding_up");
    g.add_edge("gcc_overuse", "target_bitrate_drop");
    g.add_edge("rev_delay_up", "outstanding_up");
    g.add_edge("outstanding_up", "cwnd_full");
    g.add_edge("cwnd_full", "pushback_rate_drop");
    return g;
}

std::vector<ChainPath> enumerate_chains(const CausalGraph& g) {
    g.topological_order();  // throws on a cycle
    std::vector<ChainPath> out;
    std::vector<std::string> path;
    std::function<void(const std::string&)> walk = [&](const std::string& id) {
        path.push_back(id);
        const auto* n = g.find(id);
        if (n->kind == NodeKind::CONSEQUENCE) {
            out.push_back({path});
        } else {
            for (const auto& next : g.successors(id)) walk(next);
        }
        path.pop_back();
    };
    std::vector<std::string> causes;
    for (const auto& n : g.nodes())
        if (n.kind == NodeKind::CAUSE) causes.push_back(n.id);
    std::sort(causes.begin(), causes.end());
    for (const auto& c : causes) walk(c);
    std::sort(out.begin(), out.end());
    return out;
}

SlotResolver builtin_resolver() {
    return [](const std::string& event, Selector sel) -> std::optional<int> {
        auto id = event_from_name(event);
        if (!id || selector_kind(*id) != sel.kind) return std::nullopt;
        return feature_slot(*id, sel);
    };
}

Selector resolve_selector(const CausalNode& node, Direction dir, bool flipped_path) {
    switch (node.binding) {
        case Binding::NONE: return Selector::none();
        case Binding::DIR_PATH: return Selector::of(flipped_path ? opposite(dir) : dir);
        case Binding::SIDE_SENDER: return Selector::of(sender_of(dir));
        case Binding::SIDE_RECEIVER: return Selector::of(receiver_of(dir));
        case Binding::SIDE_LOCAL: return Selector::of(Side::LOCAL);
        case Binding::SIDE_REMOTE: return Selector::of(Side::REMOTE);
        case Binding::DIR_UL: return Selector::of(Direction::UL);
        case Binding::DIR_DL: return Selector::of(Direction::DL);
    }
    return Selector::none();
}

ChainMatcher::ChainMatcher(CausalGraph graph, std::vector<ChainPath> chains, const SlotResolver& resolver)
    : graph_(std::move(graph)), chains_(std::move(chains)) {
    auto resolve = [&](const CausalNode& n, Direction dir, bool flipped) {
        const auto sel = resolve_selector(n, dir, flipped);
        auto slot = resolver(n.event, sel);
        if (!slot)
            throw GraphError(fmt::format("node '{}' binds event '{}' with selector '{}' that has no feature slot",
                                         n.id, n.event, to_string(sel)));
        return *slot;
    };
    for (Direction dir : {Direction::UL, Direction::DL}) {
        auto& per_dir = slots_[static_cast<int>(dir)];
        for (const auto& chain : chains_) {
            if (chain.nodes.size() < 2) throw GraphError("chain needs at least two nodes");
            std::vector<const CausalNode*> nodes;
            bool flipped = false;
            for (const auto& id : chain.nodes) {
                const auto* n = graph_.find(id);
                if (!n) throw GraphError(fmt::format("chain '{}' uses unknown node '{}'", chain.to_string(), id));
                flipped = flipped || n->flip;
                nodes.push_back(n);
            }
            std::vector<int> s;
            for (const auto* n : nodes) s.push_back(resolve(*n, dir, flipped));
            per_dir.push_back(std::move(s));
        }
        for (const auto& n : graph_.nodes())
            if (n.kind == NodeKind::CONSEQUENCE)
                consequence_slots_[static_cast<int>(dir)].emplace_back(n.id, resolve(n, dir, false));
    }
}

const std::vector<int>& ChainMatcher::slots(std::size_t chain, Direction dir) const {
    return slots_[static_cast<int>(dir)].at(chain);
}

std::vector<std::size_t> ChainMatcher::matching(const FeatureVector& fv, Direction dir) const {
    std::vector<std::size_t> out;
    const auto& per_dir = slots_[static_cast<int>(dir)];
    for (std::size_t c = 0; c < per_dir.size(); ++c) {
        bool all = true;
        for (int s : per_dir[c]) {
            if (static_cast<std::size_t>(s) >= fv.size() || !fv[static_cast<std::size_t>(s)]) {
                all = false;
                break;
            }
        }
        if (all) out.push_back(c);
    }
    return out;
}

std::vector<std::size_t> ChainMatcher::matching_strict(const FeatureVector& fv,
                                                       const std::vector<std::optional<Timestamp>>& onsets,
                                                       Direction dir) const {
    std::vector<std::size_t> out;
    for (auto c : matching(fv, dir)) {
        const auto& s = slots(c, dir);
        bool ordered = true;
        for (std::size_t i = 0; i + 1 < s.size() && ordered; ++i) {
            const auto& a = onsets.at(static_cast<std::size_t>(s[i]));
            const auto& b = onsets.at(static_cast<std::size_t>(s[i + 1]));
            ordered = a && b && *a <= *b;
        }
        if (ordered) out.push_back(c);
    }
    return out;
}

std::vector<ChainMatch> ChainMatcher::match(const FeatureVector& fv, Direction dir, Timestamp window_start) const {
    std::vector<ChainMatch> out;
    for (auto c : matching(fv, dir)) out.push_back({window_start, c, chains_[c], dir});
    return out;
}

std::vector<Attribution> ChainMatcher::attribute(const FeatureVector& fv, Direction dir,
                                                 const std::vector<std::size_t>& matched) const {
    std::vector<Attribution> out;
    for (const auto& [id, slot] : consequence_slots_[static_cast<int>(dir)]) {
        if (static_cast<std::size_t>(slot) >= fv.size() || !fv[static_cast<std::size_t>(slot)]) continue;
        Attribution a{id, {}};
        for (auto c : matched)
            if (chains_[c].consequence() == id) a.causes.push_back(chains_[c].cause());
        std::sort(a.causes.begin(), a.causes.end());
        a.causes.erase(std::unique(a.causes.begin(), a.causes.end()), a.causes.end());
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<Attribution> ChainMatcher::attribute(const FeatureVector& fv, Direction dir) const {
    return attribute(fv, dir, matching(fv, dir));
}

std::vector<ChainMatch> match(const FeatureVector& fv, const CausalGraph& g, Direction dir) {
    return ChainMatcher(g, enumerate_chains(g), builtin_resolver()).match(fv, dir);
}

std::vector<Attribution> attribute(const FeatureVector& fv, const CausalGraph& g, Direction dir) {
    return ChainMatcher(g, enumerate_chains(g), builtin_resolver()).attribute(fv, dir);
}

}  // namespace domino
