#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "domino/chain_dsl.hpp"
#include "fixtures.hpp"

using namespace domino;
using namespace domino::test;

namespace {

SourceLoc error_at(std::string_view src) {
    try {
        compile_source(src);
    } catch (const SpecError& e) {
        return e.loc();
    }
    ADD_FAILURE() << "no error for: " << src;
    return {};
}

std::string error_text(std::string_view src) {
    try {
        compile_source(src);
    } catch (const SpecError& e) {
        return e.message();
    }
    return "";
}

/// Statement-by-statement comparison with conditions compared by their
/// canonical rendering.
void expect_same_ast(const SpecAst& a, const SpecAst& b) {
    ASSERT_EQ(a.statements.size(), b.statements.size());
    for (std::size_t i = 0; i < a.statements.size(); ++i) {
        ASSERT_EQ(a.statements[i].index(), b.statements[i].index()) << "statement " << i;
        if (const auto* x = std::get_if<EventDef>(&a.statements[i])) {
            const auto& y = std::get<EventDef>(b.statements[i]);
            EXPECT_EQ(x->name, y.name);
            EXPECT_EQ(x->stream, y.stream);
            EXPECT_EQ(x->side, y.side);
            EXPECT_EQ(x->dir, y.dir);
            EXPECT_EQ(render(*x->condition), render(*y.condition));
        } else if (const auto* x = std::get_if<NodeDef>(&a.statements[i])) {
            const auto& y = std::get<NodeDef>(b.statements[i]);
            EXPECT_EQ(x->name, y.name);
            EXPECT_EQ(x->kind, y.kind);
            EXPECT_EQ(x->event, y.event);
            EXPECT_EQ(x->binding, y.binding);
            EXPECT_EQ(x->flip, y.flip);
        } else if (const auto* x = std::get_if<EdgeDef>(&a.statements[i])) {
            const auto& y = std::get<EdgeDef>(b.statements[i]);
            EXPECT_EQ(x->from.name, y.from.name);
            ASSERT_EQ(x->to.size(), y.to.size());
            for (std::size_t k = 0; k < x->to.size(); ++k) EXPECT_EQ(x->to[k].name, y.to[k].name);
        } else {
            const auto& x2 = std::get<ChainDef>(a.statements[i]);
            const auto& y = std::get<ChainDef>(b.statements[i]);
            EXPECT_EQ(x2.name, y.name);
            EXPECT_EQ(x2.all, y.all);
            ASSERT_EQ(x2.nodes.size(), y.nodes.size());
            for (std::size_t k = 0; k < x2.nodes.size(); ++k) EXPECT_EQ(x2.nodes[k].name, y.nodes[k].name);
        }
    }
}

/// Edges after expanding multi-target edge statements.
std::size_t edge_count(const SpecAst& ast) {
    std::size_t n = 0;
    for (const auto& s : ast.statements)
        if (const auto* e = std::get_if<EdgeDef>(&s)) n += e->to.size();
    return n;
}

}  // namespace

// ---------------------------------------------------------------- parse

TEST(Parse, EventDefinition) {
    const auto ast = parse("event jb_drain on app: exists(jitter_buffer_ms == 0)");
    ASSERT_EQ(ast.statements.size(), 1u);
    const auto& e = std::get<EventDef>(ast.statements[0]);
    EXPECT_EQ(e.name, "jb_drain");
    EXPECT_EQ(e.stream, "app");
    EXPECT_EQ(e.side, SideSpec::NONE);
    ASSERT_TRUE(e.condition);
    EXPECT_EQ(e.condition->kind, Expr::Kind::CALL);
    EXPECT_EQ(e.condition->text, "exists");
    EXPECT_EQ(render(*e.condition), "exists(jitter_buffer_ms == 0)");
    EXPECT_EQ(e.loc.line, 1);
    EXPECT_EQ(e.loc.column, 7);  // the event name
}

TEST(Parse, ExplicitChainPath) {
    const auto ast =
        parse("chain c1: cross_traffic -> tbs_drop -> rate_gap -> fwd_delay_up -> gcc_overuse -> target_bitrate_drop");
    const auto& c = std::get<ChainDef>(ast.statements.at(0));
    EXPECT_EQ(c.name, "c1");
    EXPECT_FALSE(c.all);
    ASSERT_EQ(c.nodes.size(), 6u);
    const std::vector<std::string> expected{"cross_traffic", "tbs_drop",    "rate_gap",
                                            "fwd_delay_up",  "gcc_overuse", "target_bitrate_drop"};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(c.nodes[i].name, expected[i]);
}

TEST(Parse, CommentsAndWhitespace) {
    const auto ast = parse("# heading\n\n  event x on media dir any:   # trailing\n    max(delay_ms) > 100\n");
    ASSERT_EQ(ast.statements.size(), 1u);
    EXPECT_EQ(std::get<EventDef>(ast.statements[0]).dir, DirSpec::ANY);
}

TEST(Parse, SyntaxErrorsCarryLocation) {
    try {
        parse("event a on app side each: exists(\n");
        FAIL();
    } catch (const SpecError& e) {
        EXPECT_GE(e.loc().line, 1);
        EXPECT_GE(e.loc().column, 1);
    }
    try {
        parse("event a on app side each: max(in_fps) > 3\nchian x: a -> b\n");
        FAIL();
    } catch (const SpecError& e) {
        EXPECT_EQ(e.loc().line, 2);
        EXPECT_EQ(e.loc().column, 1);
    }
}

TEST(Parse, UppercaseIdentifierRejected) {
    try {
        parse("event Big on media dir any: max(delay_ms) > 1");
        FAIL();
    } catch (const SpecError& e) {
        EXPECT_EQ(e.loc().line, 1);
        EXPECT_EQ(e.loc().column, 7);
    }
}

TEST(Parse, KeywordsAreCaseSensitive) { EXPECT_THROW(parse("Event x on media: max(delay_ms) > 1"), SpecError); }

TEST(Parse, BuiltinSourceShape) {
    const auto ast = parse(builtin_spec_source());
    std::size_t events = 0, nodes = 0, chains = 0;
    for (const auto& s : ast.statements) {
        events += std::holds_alternative<EventDef>(s);
        nodes += std::holds_alternative<NodeDef>(s);
        chains += std::holds_alternative<ChainDef>(s);
    }
    EXPECT_EQ(events, 20u);
    EXPECT_EQ(nodes, 16u);
    EXPECT_EQ(edge_count(ast), 20u);
    EXPECT_EQ(chains, 1u);
}

// ---------------------------------------------------------------- compile

TEST(Compile, BuiltinsReproduceLayoutAndChains) {
    const auto plan = compile_source(builtin_spec_source());
    const auto layout = builtin_layout();
    ASSERT_EQ(plan.slot_count(), 36u);
    for (std::size_t i = 0; i < 36; ++i) {
        EXPECT_EQ(plan.layout()[i].label(), layout[i].label());
        EXPECT_EQ(plan.layout()[i].selector, layout[i].selector);
    }
    const auto g = default_graph();
    EXPECT_EQ(plan.chains(), enumerate_chains(g));
    EXPECT_EQ(plan.graph().nodes(), g.nodes());
    // Slots resolved per chain and direction agree with the hard-coded matcher.
    const ChainMatcher ref(g, enumerate_chains(g), builtin_resolver());
    const auto m = plan.matcher();
    for (std::size_t c = 0; c < 24; ++c)
        for (auto dir : {Direction::UL, Direction::DL}) EXPECT_EQ(m.slots(c, dir), ref.slots(c, dir));
}

TEST(Compile, EmptySourceStillHasBuiltins) {
    const auto plan = compile_source("");
    EXPECT_EQ(plan.slot_count(), 36u);
    EXPECT_EQ(plan.chains().size(), 24u);
}

TEST(Compile, NewEventAppendsSlot) {
    const auto plan = compile_source("event big_delay on media dir any: max(delay_ms) > 300\n");
    ASSERT_EQ(plan.slot_count(), 37u);
    EXPECT_EQ(plan.layout()[36].label(), "big_delay");
    EXPECT_EQ(plan.chains().size(), 24u);
}

TEST(Compile, NewEventAndChain) {
    const auto plan = compile_source(
        "event big_delay on media dir any: max(delay_ms) > 300\n"
        "chain spike: harq_retx -> fwd_delay_up -> big_delay\n");
    EXPECT_EQ(plan.slot_count(), 37u);
    ASSERT_EQ(plan.chains().size(), 25u);
    EXPECT_EQ(plan.chains().back().to_string(), "harq_retx -> fwd_delay_up -> big_delay");
    EXPECT_EQ(plan.graph().find("big_delay")->kind, NodeKind::CONSEQUENCE);
}

TEST(Compile, PerSideEventTakesTwoSlots) {
    const auto plan = compile_source("event freeze on app side each: exists(in_fps == 0)\n");
    ASSERT_EQ(plan.slot_count(), 38u);
    EXPECT_EQ(plan.layout()[36].label(), "freeze.local");
    EXPECT_EQ(plan.layout()[37].label(), "freeze.remote");
}

TEST(Compile, RedefiningBuiltinKeepsSlot) {
    const auto plan = compile_source("event harq_retx on ran dir each: count(harq_retx) > 3\n");
    EXPECT_EQ(plan.slot_count(), 36u);
    Trace t;
    for (int i = 0; i < 20; ++i) {
        t.ran.push_back(ran_at(0.1 + 0.0025 * i));
        t.ran.back().harq_retx = i < 5;
    }
    const auto fv = plan.evaluate(slice(t, Window{Timestamp{0}, 5}), {});
    EXPECT_TRUE(fv[static_cast<std::size_t>(feature_slot(EventId::R17_HARQ_RETX, Selector::of(Direction::DL)))]);
}

TEST(Compile, UserEventEvaluates) {
    const auto plan = compile_source("event big_delay on media dir any: max(delay_ms) > 300\n");
    Trace t;
    t.packets = delay_series({100, 200, 301});
    EXPECT_TRUE(plan.evaluate(slice(t, Window{Timestamp{0}, 5}), {})[36]);
    t.packets = delay_series({100, 200, 300});
    EXPECT_FALSE(plan.evaluate(slice(t, Window{Timestamp{0}, 5}), {})[36]);
}

TEST(Compile, UnknownNameInChainAtToken) {
    const auto loc = error_at("chain c: harq_retx -> fwd_delay_upp -> jb_drain\n");
    EXPECT_EQ(loc.line, 1);
    EXPECT_EQ(loc.column, 23);
    EXPECT_NE(error_text("chain c: harq_retx -> fwd_delay_upp -> jb_drain\n").find("fwd_delay_upp"),
              std::string::npos);
}

TEST(Compile, RepeatedNodeRejected) {
    const auto loc = error_at("chain c: harq_retx -> fwd_delay_up -> harq_retx\n");
    EXPECT_EQ(loc.column, 39);
    EXPECT_NE(error_text("chain c: harq_retx -> fwd_delay_up -> harq_retx\n").find("twice"), std::string::npos);
}

TEST(Compile, CycleRejected) {
    const auto msg = error_text("edge outstanding_up -> fwd_delay_up\n");
    EXPECT_NE(msg.find("cycle"), std::string::npos) << msg;
}

TEST(Compile, UnknownFieldRejected) {
    const auto loc = error_at("\nevent x on ran dir each: max(signal_dbm) > 3\n");
    EXPECT_EQ(loc.line, 2);
    EXPECT_EQ(loc.column, 30);
}

TEST(Compile, FieldFromOtherStreamRejected) {
    EXPECT_NE(error_text("event x on media dir any: max(mcs) > 3\n").find("unknown field"), std::string::npos);
}

TEST(Compile, TypeErrorsRejected) {
    EXPECT_THROW(compile_source("event x on media dir any: max(delay_ms)\n"), SpecError);
    EXPECT_THROW(compile_source("event x on media dir any: exists(delay_ms)\n"), SpecError);
    EXPECT_THROW(compile_source("event x on app side each: max(in_fps) > $nope\n"), SpecError);
}

TEST(Compile, StreamBindingRules) {
    EXPECT_THROW(compile_source("event x on app: exists(jitter_buffer_ms == 0)\n"), SpecError);
    EXPECT_THROW(compile_source("event x on app dir ul: exists(jitter_buffer_ms == 0)\n"), SpecError);
    EXPECT_THROW(compile_source("event x on radio dir ul: count() > 0\n"), SpecError);
}

TEST(Compile, WrongKindPositionRejected) {
    EXPECT_NE(error_text("chain c: fwd_delay_up -> jb_drain\n").find("cause"), std::string::npos);
}

// ---------------------------------------------------------------- emit

TEST(Emit, BuiltinsContainAllConditions) {
    const auto text = emit_pseudocode(compile_source(builtin_spec_source()));
    for (int n = 1; n <= kEventCount; ++n)
        EXPECT_NE(text.find(std::string("event ") + event_name(event_at(n)) + " on "), std::string::npos)
            << event_name(event_at(n));
    EXPECT_NE(text.find("exists(jitter_buffer_ms == 0)"), std::string::npos);
    EXPECT_NE(text.find("count(harq_retx) > $harq_count"), std::string::npos);
    EXPECT_NE(text.find("chain default: all"), std::string::npos);
}

TEST(Emit, GoldenFile) {
    const auto text = emit_pseudocode(compile_source(builtin_spec_source()));
    std::ifstream in(DOMINO_TEST_DATA "/builtin_plan.golden", std::ios::binary);
    ASSERT_TRUE(in) << "missing golden file";
    std::ostringstream golden;
    golden << in.rdbuf();
    EXPECT_EQ(text, golden.str());
}

TEST(Emit, EmptySpecHeaderOnly) {
    EXPECT_EQ(emit_pseudocode(compile_source("")), "# domino detection plan\n# 36 feature slots, 24 chains\n");
}

TEST(Emit, RoundTripFixedPoint) {
    for (std::string_view src : {builtin_spec_source(),
                                 std::string_view("event big_delay on media dir any: max(delay_ms) > 300\n"
                                                  "chain spike: harq_retx -> fwd_delay_up -> big_delay\n")}) {
        const auto once = emit_pseudocode(compile_source(src));
        const auto twice = emit_pseudocode(compile_source(once));
        EXPECT_EQ(once, twice);
    }
}

TEST(Emit, ParseOfEmitIsIdentityOnAst) {
    const auto ast = parse(builtin_spec_source());
    const auto again = parse(emit_pseudocode(compile(ast)));
    // Emission writes one edge statement per target.
    EXPECT_EQ(edge_count(ast), edge_count(again));
    SpecAst flat;
    for (const auto& s : ast.statements) {
        if (const auto* e = std::get_if<EdgeDef>(&s)) {
            for (const auto& to : e->to) flat.statements.push_back(EdgeDef{e->from, {to}, e->loc});
        } else {
            flat.statements.push_back(s);
        }
    }
    expect_same_ast(flat, again);
}

// ---------------------------------------------------------------- equivalence

TEST(Equivalence, PlanMatchesHardCodedDetector) {
    const auto plan = compile_source(builtin_spec_source());
    const auto g = default_graph();
    const ChainMatcher ref(g, enumerate_chains(g), builtin_resolver());
    const auto pm = plan.matcher();
    std::mt19937_64 rng(2024);
    int windows = 0, set_bits = 0;
    while (windows < 1000) {
        const auto t = random_trace(rng, 12);
        DetectorConfig cfg;
        if (rng() % 3 == 0) cfg = DetectorConfig::harq20();
        if (rng() % 4 == 0) cfg.trend_bucket = 5;
        for (Window w{Timestamp{0}, 5}; w.start < sec(7.5) && windows < 1000; w = advance(w, 0.5), ++windows) {
            const auto view = slice(t, w);
            const auto want = featurize(view, cfg);
            const auto got = plan.evaluate(view, cfg);
            ASSERT_EQ(got, want) << "window " << windows << "\n" << got.to_string() << "\n" << want.to_string();
            set_bits += static_cast<int>(want.count());
            for (auto dir : {Direction::UL, Direction::DL}) {
                EXPECT_EQ(pm.matching(got, dir), ref.matching(want, dir));
                EXPECT_EQ(pm.attribute(got, dir), ref.attribute(want, dir));
            }
        }
    }
    EXPECT_GT(set_bits, 1000);  // the corpus exercises the conditions, not just all-false vectors
}
