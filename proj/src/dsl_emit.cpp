#include <fmt/format.h>

#include "domino/chain_dsl.hpp"

namespace domino {

namespace {

const char* side_text(SideSpec s) {
    switch (s) {
        case SideSpec::LOCAL: return " side local";
        case SideSpec::REMOTE: return " side remote";
        case SideSpec::EACH: return " side each";
        case SideSpec::NONE: break;
    }
    return "";
}

const char* dir_text(DirSpec d) {
    switch (d) {
        case DirSpec::UL: return " dir ul";
        case DirSpec::DL: return " dir dl";
        case DirSpec::EACH: return " dir each";
        case DirSpec::ANY: return " dir any";
        case DirSpec::NONE: break;
    }
    return "";
}

}  // namespace

std::string emit_pseudocode(const DetectionPlan& plan) {
    std::string out;
    out += "# domino detection plan\n";
    out += fmt::format("# {} feature slots, {} chains\n", plan.slot_count(), plan.chains().size());

    const auto& layout = plan.layout();
    for (const auto& item : plan.items()) {
        if (!item.from_source) continue;
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, EventDef>) {
                    const PlanEvent* ev = nullptr;
                    for (const auto& e : plan.events())
                        if (e.def.name == d.name) ev = &e;
                    out += "\n";
                    if (ev) {
                        if (ev->slot_count == 1) {
                            out += fmt::format("# slot {}: {}\n", ev->first_slot,
                                               layout[static_cast<std::size_t>(ev->first_slot)].label());
                        } else {
                            out += fmt::format("# slots {}-{}: {}, {}\n", ev->first_slot, ev->first_slot + 1,
                                               layout[static_cast<std::size_t>(ev->first_slot)].label(),
                                               layout[static_cast<std::size_t>(ev->first_slot + 1)].label());
                        }
                    }
                    out += fmt::format("event {} on {}{}{}:\n    {}\n", d.name, d.stream, side_text(d.side),
                                       dir_text(d.dir), render(*d.condition));
                } else if constexpr (std::is_same_v<T, NodeDef>) {
                    std::string binding = to_string(d.binding);
                    out += fmt::format("node {}: {} {}{}{}{}\n", d.name, to_string(d.kind), d.event,
                                       binding.empty() ? "" : " ", binding, d.flip ? " flip" : "");
                } else if constexpr (std::is_same_v<T, EdgeDef>) {
                    for (const auto& to : d.to) out += fmt::format("edge {} -> {}\n", d.from.name, to.name);
                } else {
                    if (d.all) {
                        out += fmt::format("chain {}: all\n", d.name);
                    } else {
                        std::string path;
                        for (const auto& n : d.nodes) path += (path.empty() ? "" : " -> ") + n.name;
                        out += fmt::format("chain {}: {}\n", d.name, path);
                    }
                }
            },
            item.statement);
    }
    return out;
}

}  // namespace domino
