#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "domino/causal_graph.hpp"
#include "domino/detector.hpp"

namespace domino {

struct SourceLoc {
    int line = 0;
    int column = 0;
};

/// Lexical, syntax or semantic error in a chain spec.
class SpecError : public std::runtime_error {
public:
    SpecError(const std::string& message, SourceLoc loc);
    SourceLoc loc() const { return loc_; }
    const std::string& message() const { return message_; }

private:
    SourceLoc loc_;
    std::string message_;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { NUMBER, BOOLEAN, NAME, PARAM, UNARY, BINARY, CALL };
    Kind kind = Kind::NUMBER;
    SourceLoc loc;
    double number = 0;
    bool boolean = false;
    std::string text;  // name, parameter, operator or function
    std::vector<ExprPtr> args;
    std::vector<std::string> arg_names;  // parallel to args; empty for positional
};

enum class SideSpec : std::uint8_t { NONE, LOCAL, REMOTE, EACH };
enum class DirSpec : std::uint8_t { NONE, UL, DL, EACH, ANY };

struct EventDef {
    std::string name;
    SourceLoc loc;
    std::string stream;
    SourceLoc stream_loc;
    SideSpec side = SideSpec::NONE;
    DirSpec dir = DirSpec::NONE;
    ExprPtr condition;
};

struct NodeDef {
    std::string name;
    SourceLoc loc;
    NodeKind kind = NodeKind::INTERMEDIATE;
    std::string event;
    SourceLoc event_loc;
    Binding binding = Binding::NONE;
    bool flip = false;
};

struct NameRef {
    std::string name;
    SourceLoc loc;
};

struct EdgeDef {
    NameRef from;
    std::vector<NameRef> to;
    SourceLoc loc;
};

struct ChainDef {
    std::string name;
    SourceLoc loc;
    bool all = false;
    std::vector<NameRef> nodes;
};

using Statement = std::variant<EventDef, NodeDef, EdgeDef, ChainDef>;

struct SpecAst {
    std::vector<Statement> statements;
};

SpecAst parse(std::string_view source);

/// Text of the shipped built-in spec (the 20 conditions and the default
/// graph).
std::string_view builtin_spec_source();

class CompiledCondition;

/// One event definition with its slot range in the feature layout.
struct PlanEvent {
    EventDef def;
    Selector::Kind selector_kind = Selector::Kind::NONE;
    int first_slot = 0;
    int slot_count = 1;
    bool from_source = false;  // defined by the compiled text rather than inherited
    std::shared_ptr<const CompiledCondition> condition;
};

struct PlanChain {
    std::string name;
    bool all = false;
    std::vector<ChainPath> paths;  // paths this statement contributed
    bool from_source = false;
    ChainDef def;
};

/// Executable form of a spec: the built-in definitions overridden and
/// extended by the compiled text.
class DetectionPlan {
public:
    const std::vector<PlanEvent>& events() const { return events_; }
    const std::vector<SlotInfo>& layout() const { return layout_; }
    std::size_t slot_count() const { return layout_.size(); }
    const CausalGraph& graph() const { return graph_; }
    /// Deduplicated chain list in declaration order.
    const std::vector<ChainPath>& chains() const { return chains_; }

    SlotResolver resolver() const;
    ChainMatcher matcher() const;

    FeatureVector evaluate(const WindowView& view, const DetectorConfig& cfg) const;

    /// Source statements in merged order (inherited ones flagged).
    struct Item {
        Statement statement;
        bool from_source = false;
    };
    const std::vector<Item>& items() const { return items_; }

private:
    friend DetectionPlan compile(const SpecAst& ast);

    std::vector<PlanEvent> events_;
    std::vector<SlotInfo> layout_;
    CausalGraph graph_;
    std::vector<ChainPath> chains_;
    std::vector<Item> items_;
};

/// Compiles `ast` on top of the built-in definitions. A definition whose
/// name matches a built-in replaces it in place; new events take appended
/// slots. Throws SpecError.
DetectionPlan compile(const SpecAst& ast);
DetectionPlan compile_source(std::string_view source);

/// Readable rendering of the definitions that came from the compiled text.
/// The output is itself a valid spec.
std::string emit_pseudocode(const DetectionPlan& plan);

/// Canonical text of an expression.
std::string render(const Expr& e);

}  // namespace domino
