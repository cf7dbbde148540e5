#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "domino/causal_graph.hpp"

using namespace domino;

namespace {

const std::vector<std::string> kCauses{"poor_channel", "cross_traffic", "ul_scheduling",
                                       "harq_retx",    "rlc_retx",      "rrc_state"};
const std::vector<std::string> kConsequences{"jb_drain", "target_bitrate_drop", "pushback_rate_drop"};

std::size_t slot(const char* label) {
    const auto layout = builtin_layout();
    for (std::size_t i = 0; i < layout.size(); ++i)
        if (layout[i].label() == label) return i;
    throw std::runtime_error(std::string("no slot ") + label);
}

FeatureVector bits(std::initializer_list<const char*> labels) {
    FeatureVector fv;
    for (const auto* l : labels) fv.set(slot(l), true);
    return fv;
}

FeatureVector all_true() {
    FeatureVector fv;
    for (std::size_t i = 0; i < fv.size(); ++i) fv.set(i, true);
    return fv;
}

/// Path count by dynamic programming over successor lists, independent of
/// the enumerator's DFS.
std::size_t count_paths(const CausalGraph& g) {
    std::map<std::string, std::size_t> memo;
    std::function<std::size_t(const std::string&)> from = [&](const std::string& id) -> std::size_t {
        if (auto it = memo.find(id); it != memo.end()) return it->second;
        std::size_t n = g.find(id)->kind == NodeKind::CONSEQUENCE ? 1 : 0;
        for (const auto& [a, b] : g.edges())
            if (a == id) n += from(b);
        return memo[id] = n;
    };
    std::size_t total = 0;
    for (const auto& n : g.nodes())
        if (n.kind == NodeKind::CAUSE) total += from(n.id);
    return total;
}

std::set<std::string> reachable(const CausalGraph& g, const std::string& start) {
    std::set<std::string> seen{start};
    std::vector<std::string> todo{start};
    while (!todo.empty()) {
        const auto id = todo.back();
        todo.pop_back();
        for (const auto& [a, b] : g.edges())
            if (a == id && seen.insert(b).second) todo.push_back(b);
    }
    return seen;
}

}  // namespace

TEST(DefaultGraph, TwentyFourPaths) {
    const auto g = default_graph();
    const auto chains = enumerate_chains(g);
    EXPECT_EQ(chains.size(), 24u);
    EXPECT_EQ(count_paths(g), 24u);
    EXPECT_EQ(2u * 4 + 4u * 4, 24u);  // two radio causes and four others, four routes each
}

TEST(DefaultGraph, NodeSets) {
    const auto g = default_graph();
    std::vector<std::string> causes, inter, cons;
    for (const auto& n : g.nodes()) {
        (n.kind == NodeKind::CAUSE ? causes : n.kind == NodeKind::CONSEQUENCE ? cons : inter).push_back(n.id);
    }
    EXPECT_EQ(std::set<std::string>(causes.begin(), causes.end()),
              std::set<std::string>(kCauses.begin(), kCauses.end()));
    EXPECT_EQ(std::set<std::string>(cons.begin(), cons.end()),
              std::set<std::string>(kConsequences.begin(), kConsequences.end()));
    EXPECT_EQ(inter.size(), 7u);
}

TEST(DefaultGraph, EveryCauseReachesEveryConsequence) {
    const auto g = default_graph();
    for (const auto& c : kCauses) {
        const auto r = reachable(g, c);
        for (const auto& q : kConsequences) EXPECT_TRUE(r.count(q)) << c << " -> " << q;
    }
    // And every enumerated (cause, consequence) pair appears.
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& p : enumerate_chains(g)) pairs.insert({p.cause(), p.consequence()});
    EXPECT_EQ(pairs.size(), 18u);
}

TEST(DefaultGraph, Acyclic) {
    const auto g = default_graph();
    const auto order = g.topological_order();
    EXPECT_EQ(order.size(), g.nodes().size());
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& [a, b] : g.edges()) EXPECT_LT(pos[a], pos[b]);
}

TEST(DefaultGraph, PathsFollowEdgesAndAreSorted) {
    const auto g = default_graph();
    const auto chains = enumerate_chains(g);
    EXPECT_TRUE(std::is_sorted(chains.begin(), chains.end()));
    for (const auto& p : chains) {
        EXPECT_EQ(g.find(p.cause())->kind, NodeKind::CAUSE);
        EXPECT_EQ(g.find(p.consequence())->kind, NodeKind::CONSEQUENCE);
        for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) EXPECT_TRUE(g.has_edge(p.nodes[i], p.nodes[i + 1]));
    }
}

TEST(EnumerateChains, SingleEdge) {
    CausalGraph g;
    g.add_node({"c", NodeKind::CAUSE, "harq_retx", Binding::DIR_PATH});
    g.add_node({"q", NodeKind::CONSEQUENCE, "jb_drain", Binding::SIDE_RECEIVER});
    g.add_edge("c", "q");
    const auto p = enumerate_chains(g);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].to_string(), "c -> q");
}

TEST(EnumerateChains, Diamond) {
    CausalGraph g;
    g.add_node({"c", NodeKind::CAUSE, "harq_retx", Binding::DIR_PATH});
    g.add_node({"a", NodeKind::INTERMEDIATE, "fwd_delay_up", Binding::NONE});
    g.add_node({"b", NodeKind::INTERMEDIATE, "rev_delay_up", Binding::NONE});
    g.add_node({"q", NodeKind::CONSEQUENCE, "jb_drain", Binding::SIDE_RECEIVER});
    g.add_edge("c", "a");
    g.add_edge("c", "b");
    g.add_edge("a", "q");
    g.add_edge("b", "q");
    const auto p = enumerate_chains(g);
    EXPECT_EQ(p.size(), count_paths(g));
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0].to_string(), "c -> a -> q");
    EXPECT_EQ(p[1].to_string(), "c -> b -> q");
}

TEST(EnumerateChains, CycleIsFatal) {
    CausalGraph g;
    g.add_node({"c", NodeKind::CAUSE, "harq_retx", Binding::DIR_PATH});
    g.add_node({"a", NodeKind::INTERMEDIATE, "fwd_delay_up", Binding::NONE});
    g.add_node({"b", NodeKind::INTERMEDIATE, "rev_delay_up", Binding::NONE});
    g.add_node({"q", NodeKind::CONSEQUENCE, "jb_drain", Binding::SIDE_RECEIVER});
    g.add_edge("c", "a");
    g.add_edge("a", "b");
    g.add_edge("b", "a");
    g.add_edge("b", "q");
    EXPECT_THROW(enumerate_chains(g), GraphError);
}

TEST(CausalGraph, StructuralRules) {
    CausalGraph g;
    g.add_node({"c", NodeKind::CAUSE, "harq_retx", Binding::DIR_PATH});
    g.add_node({"q", NodeKind::CONSEQUENCE, "jb_drain", Binding::SIDE_RECEIVER});
    EXPECT_THROW(g.add_node({"c", NodeKind::CAUSE, "rlc_retx", Binding::DIR_PATH}), GraphError);
    EXPECT_THROW(g.add_edge("q", "c"), GraphError);
    EXPECT_THROW(g.add_edge("c", "missing"), GraphError);
    g.add_edge("c", "q");
    g.add_edge("c", "q");
    EXPECT_EQ(g.edges().size(), 1u);
}

TEST(Match, SaturatedVectorMatchesAll) {
    const auto g = default_graph();
    EXPECT_EQ(match(all_true(), g, Direction::UL).size(), 24u);
    EXPECT_EQ(match(all_true(), g, Direction::DL).size(), 24u);
}

TEST(Match, ConsequencesAloneMatchNothing) {
    const auto fv = bits({"jb_drain.local", "jb_drain.remote", "target_bitrate_drop.local",
                          "target_bitrate_drop.remote", "pushback_rate_drop.local", "pushback_rate_drop.remote"});
    EXPECT_TRUE(match(fv, default_graph(), Direction::UL).empty());
    EXPECT_TRUE(match(fv, default_graph(), Direction::DL).empty());
}

TEST(Match, CrossTrafficToTargetOnDownlink) {
    // Downlink media is sent by the remote client, so the GCC events bind there.
    const auto fv = bits({"cross_traffic.dl", "tbs_drop.dl", "rate_gap.dl", "fwd_delay_up", "gcc_overuse.remote",
                          "target_bitrate_drop.remote"});
    const auto dl = match(fv, default_graph(), Direction::DL);
    ASSERT_EQ(dl.size(), 1u);
    EXPECT_EQ(dl[0].path.to_string(),
              "cross_traffic -> tbs_drop -> rate_gap -> fwd_delay_up -> gcc_overuse -> target_bitrate_drop");
    EXPECT_EQ(dl[0].cause_id(), "cross_traffic");
    EXPECT_EQ(dl[0].consequence_id(), "target_bitrate_drop");
    EXPECT_EQ(dl[0].stream_dir, Direction::DL);
    EXPECT_TRUE(match(fv, default_graph(), Direction::UL).empty());
}

TEST(Match, SenderSideMatters) {
    const auto fv = bits({"cross_traffic.dl", "tbs_drop.dl", "rate_gap.dl", "fwd_delay_up", "gcc_overuse.local",
                          "target_bitrate_drop.local"});
    EXPECT_TRUE(match(fv, default_graph(), Direction::DL).empty());
}

TEST(Match, ReversePathBindsOppositeDirection) {
    // Feedback for downlink media travels uplink.
    const auto fv = bits({"harq_retx.ul", "rev_delay_up", "outstanding_up.remote", "cwnd_full.remote",
                          "pushback_rate_drop.remote"});
    const auto dl = match(fv, default_graph(), Direction::DL);
    ASSERT_EQ(dl.size(), 1u);
    EXPECT_EQ(dl[0].path.to_string(), "harq_retx -> rev_delay_up -> outstanding_up -> cwnd_full -> pushback_rate_drop");
    const auto wrong = bits({"harq_retx.dl", "rev_delay_up", "outstanding_up.remote", "cwnd_full.remote",
                             "pushback_rate_drop.remote"});
    EXPECT_TRUE(match(wrong, default_graph(), Direction::DL).empty());
}

TEST(Match, JitterBufferBindsReceiver) {
    const auto fv = bits({"rlc_retx.ul", "fwd_delay_up", "jb_drain.remote"});
    const auto ul = match(fv, default_graph(), Direction::UL);
    ASSERT_EQ(ul.size(), 1u);
    EXPECT_EQ(ul[0].path.to_string(), "rlc_retx -> fwd_delay_up -> jb_drain");
}

TEST(Match, MonotoneAndSound) {
    const auto g = default_graph();
    const ChainMatcher m(g, enumerate_chains(g), builtin_resolver());
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 2000; ++trial) {
        FeatureVector fv;
        for (std::size_t i = 0; i < fv.size(); ++i) fv.set(i, rng() % 3 != 0);
        for (auto dir : {Direction::UL, Direction::DL}) {
            const auto before = m.matching(fv, dir);
            for (auto c : before) {
                // Every node bit on a matched chain is set.
                for (int s : m.slots(c, dir)) EXPECT_TRUE(fv[static_cast<std::size_t>(s)]);
            }
            auto more = fv;
            more.set(rng() % fv.size(), true);
            const auto after = m.matching(more, dir);
            for (auto c : before) EXPECT_TRUE(std::find(after.begin(), after.end(), c) != after.end());
        }
    }
}

TEST(Attribute, UnknownWhenNoCauseChain) {
    const auto fv = bits({"jb_drain.remote"});
    const auto a = attribute(fv, default_graph(), Direction::UL);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].consequence_id, "jb_drain");
    EXPECT_TRUE(a[0].unknown());
}

TEST(Attribute, MultiCause) {
    const auto fv = bits({"harq_retx.ul", "rlc_retx.ul", "fwd_delay_up", "jb_drain.remote"});
    const auto a = attribute(fv, default_graph(), Direction::UL);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].causes, (std::vector<std::string>{"harq_retx", "rlc_retx"}));
}

TEST(Attribute, NoConsequenceNoRecord) {
    const auto fv = bits({"harq_retx.ul", "fwd_delay_up"});
    EXPECT_TRUE(attribute(fv, default_graph(), Direction::UL).empty());
}

TEST(StrictMode, OnsetOrderRequired) {
    const auto g = default_graph();
    const ChainMatcher m(g, enumerate_chains(g), builtin_resolver());
    const auto fv = bits({"rlc_retx.ul", "fwd_delay_up", "jb_drain.remote"});
    std::vector<std::optional<Timestamp>> onsets(36);
    onsets[slot("rlc_retx.ul")] = Timestamp{100};
    onsets[slot("fwd_delay_up")] = Timestamp{200};
    onsets[slot("jb_drain.remote")] = Timestamp{300};
    EXPECT_EQ(m.matching_strict(fv, onsets, Direction::UL).size(), 1u);
    onsets[slot("rlc_retx.ul")] = Timestamp{250};
    EXPECT_TRUE(m.matching_strict(fv, onsets, Direction::UL).empty());
    EXPECT_EQ(m.matching(fv, Direction::UL).size(), 1u);
}
