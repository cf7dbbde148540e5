#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "domino/chain_dsl.hpp"

namespace domino {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Group : std::uint8_t { APP, PACKET, RAN };

enum class Field : std::uint8_t {
    IN_FPS, OUT_FPS, OUT_RES, JITTER_BUFFER, TARGET, PUSHBACK, GCC_STATE, OUTSTANDING, CWND, APP_SEND_RATE,
    DELAY_MS, SIZE,
    PRB, MCS, TBS, RNTI, OWN, HARQ, RLC, PROACTIVE, TBS_RATE, APP_RATE,
};

struct FieldInfo {
    const char* name;
    Group group;
    Field field;
    bool boolean;
};

constexpr std::array<FieldInfo, 22> kFields{{
    {"in_fps", Group::APP, Field::IN_FPS, false},
    {"out_fps", Group::APP, Field::OUT_FPS, false},
    {"out_res_height", Group::APP, Field::OUT_RES, false},
    {"jitter_buffer_ms", Group::APP, Field::JITTER_BUFFER, false},
    {"target_bitrate_bps", Group::APP, Field::TARGET, false},
    {"pushback_rate_bps", Group::APP, Field::PUSHBACK, false},
    {"gcc_state", Group::APP, Field::GCC_STATE, false},
    {"outstanding_bytes", Group::APP, Field::OUTSTANDING, false},
    {"cwnd_bytes", Group::APP, Field::CWND, false},
    {"app_send_rate_bps", Group::APP, Field::APP_SEND_RATE, false},
    {"delay_ms", Group::PACKET, Field::DELAY_MS, false},
    {"size_bytes", Group::PACKET, Field::SIZE, false},
    {"prb", Group::RAN, Field::PRB, false},
    {"mcs", Group::RAN, Field::MCS, false},
    {"tbs_bits", Group::RAN, Field::TBS, false},
    {"rnti", Group::RAN, Field::RNTI, false},
    {"own", Group::RAN, Field::OWN, true},
    {"harq_retx", Group::RAN, Field::HARQ, true},
    {"rlc_retx", Group::RAN, Field::RLC, true},
    {"proactive", Group::RAN, Field::PROACTIVE, true},
    {"tbs_rate_bps", Group::RAN, Field::TBS_RATE, false},
    {"app_rate_bps", Group::RAN, Field::APP_RATE, false},
}};

enum class StreamId : std::uint8_t { APP, MEDIA, RTCP, RAN, RAN_ALL };

std::optional<StreamId> stream_from_name(std::string_view s) {
    if (s == "app") return StreamId::APP;
    if (s == "media") return StreamId::MEDIA;
    if (s == "rtcp") return StreamId::RTCP;
    if (s == "ran") return StreamId::RAN;
    if (s == "ran_all") return StreamId::RAN_ALL;
    return std::nullopt;
}

Group group_of(StreamId s) {
    switch (s) {
        case StreamId::APP: return Group::APP;
        case StreamId::MEDIA:
        case StreamId::RTCP: return Group::PACKET;
        case StreamId::RAN:
        case StreamId::RAN_ALL: return Group::RAN;
    }
    return Group::APP;
}

// ---- values ----

enum class VType : std::uint8_t { SCALAR, BOOL, SERIES, BSERIES };

const char* to_string(VType t) {
    switch (t) {
        case VType::SCALAR: return "number";
        case VType::BOOL: return "boolean";
        case VType::SERIES: return "numeric series";
        case VType::BSERIES: return "boolean series";
    }
    return "?";
}

// Boolean series elements are 1, 0, or -1 when undefined (a NaN operand).
struct Value {
    VType type = VType::SCALAR;
    double num = 0;
    bool b = false;
    std::vector<double> v;
    std::vector<std::int8_t> bv;
    std::vector<std::int64_t> ts;
};

enum class Op : std::uint8_t {
    NUM, BOOL, PARAM, FIELD, NEG, NOT, ADD, SUB, MUL, DIV, EQ, NE, LT, LE, GT, GE, AND, OR, WHERE,
    MAX, MIN, SUM, MEAN, COUNT_ALL, COUNT, FRAC, EXISTS, FORALL, ARGMAX, ARGMIN, PERCENTILE,
    ADJ_DROP, ADJ_RISE, ADJ_CHANGE, TREND_UP, BUCKET_MEAN, BUCKET_PCT,
};

struct TNode {
    Op op = Op::NUM;
    VType type = VType::SCALAR;
    bool derived = false;  // series no longer aligned with the record list
    double num = 0;
    bool b = false;
    std::string param;
    Field field = Field::IN_FPS;
    std::vector<TNode> kids;
};

// Pre-split records of one window, shared by every event evaluated on it.
struct Source {
    const WindowView* view = nullptr;
    std::array<std::vector<const AppRecord*>, 2> app;
    std::array<std::array<std::vector<const PacketRecord*>, 2>, 2> pkts;  // [kind][dir]
    std::array<std::vector<const PacketRecord*>, 2> pkts_merged;          // [kind]
    std::array<std::vector<const RanRecord*>, 2> own;                      // [dir]
    std::vector<const RanRecord*> own_merged;
    std::array<std::vector<const RanRecord*>, 2> all;
    std::vector<const RanRecord*> all_merged;
    mutable std::array<std::optional<double>, 2> spacing_s;

    explicit Source(const WindowView& v) : view(&v) {
        for (const auto& a : v.app) app[static_cast<int>(a.side)].push_back(&a);
        for (const auto& p : v.packets) {
            pkts[static_cast<int>(p.kind)][static_cast<int>(p.dir)].push_back(&p);
            pkts_merged[static_cast<int>(p.kind)].push_back(&p);
        }
        for (const auto& r : v.ran) {
            all[static_cast<int>(r.dir)].push_back(&r);
            all_merged.push_back(&r);
            if (r.is_own_ue) {
                own[static_cast<int>(r.dir)].push_back(&r);
                own_merged.push_back(&r);
            }
        }
    }

    double spacing(Direction d) const {
        auto& cached = spacing_s[static_cast<int>(d)];
        if (!cached) {
            const auto& recs = own[static_cast<int>(d)];
            if (recs.size() < 2) {
                cached = kNaN;
            } else {
                std::vector<double> gaps;
                gaps.reserve(recs.size() - 1);
                for (std::size_t i = 1; i < recs.size(); ++i)
                    gaps.push_back(static_cast<double>(recs[i]->ts.micros - recs[i - 1]->ts.micros));
                cached = percentile_nearest_rank(std::move(gaps), 50) * 1e-6;
            }
        }
        return *cached;
    }
};

struct Frame {
    const Source* src = nullptr;
    Group group = Group::APP;
    std::vector<const AppRecord*> app;
    std::vector<const PacketRecord*> pkts;
    std::vector<const RanRecord*> ran;
    Timestamp origin;
    const DetectorConfig* cfg = nullptr;

    std::size_t size() const {
        return group == Group::APP ? app.size() : group == Group::PACKET ? pkts.size() : ran.size();
    }
};

Value scalar(double x) {
    Value v;
    v.type = VType::SCALAR;
    v.num = x;
    return v;
}

Value boolean(bool x) {
    Value v;
    v.type = VType::BOOL;
    v.b = x;
    return v;
}

Value field_values(const Frame& f, Field field, bool is_bool) {
    Value out;
    out.type = is_bool ? VType::BSERIES : VType::SERIES;
    const auto n = f.size();
    out.ts.reserve(n);
    if (is_bool) out.bv.reserve(n);
    else out.v.reserve(n);
    switch (f.group) {
        case Group::APP:
            for (const auto* a : f.app) {
                out.ts.push_back(a->ts.micros);
                double x = 0;
                switch (field) {
                    case Field::IN_FPS: x = a->in_fps; break;
                    case Field::OUT_FPS: x = a->out_fps; break;
                    case Field::OUT_RES: x = static_cast<double>(a->out_res_height); break;
                    case Field::JITTER_BUFFER: x = a->jitter_buffer_ms; break;
                    case Field::TARGET: x = a->target_bitrate_bps; break;
                    case Field::PUSHBACK: x = a->pushback_rate_bps; break;
                    case Field::GCC_STATE: x = static_cast<double>(a->gcc_state); break;
                    case Field::OUTSTANDING: x = static_cast<double>(a->outstanding_bytes); break;
                    case Field::CWND: x = static_cast<double>(a->cwnd_bytes); break;
                    case Field::APP_SEND_RATE: x = a->app_send_rate_bps; break;
                    default: break;
                }
                out.v.push_back(x);
            }
            break;
        case Group::PACKET:
            for (const auto* p : f.pkts) {
                out.ts.push_back(p->send_ts.micros);
                out.v.push_back(field == Field::DELAY_MS ? p->one_way_delay_ms() : static_cast<double>(p->size_bytes));
            }
            break;
        case Group::RAN: {
            // Last-value-hold of the sender's app rate, one cursor per side.
            std::array<std::size_t, 2> cursor{0, 0};
            std::array<double, 2> held{kNaN, kNaN};
            for (const auto* r : f.ran) {
                out.ts.push_back(r->ts.micros);
                if (is_bool) {
                    bool x = false;
                    switch (field) {
                        case Field::OWN: x = r->is_own_ue; break;
                        case Field::HARQ: x = r->harq_retx; break;
                        case Field::RLC: x = r->rlc_retx; break;
                        case Field::PROACTIVE: x = r->proactive_grant; break;
                        default: break;
                    }
                    out.bv.push_back(x ? 1 : 0);
                    continue;
                }
                double x = 0;
                switch (field) {
                    case Field::PRB: x = r->prb; break;
                    case Field::MCS: x = r->mcs; break;
                    case Field::TBS: x = static_cast<double>(r->tbs_bits); break;
                    case Field::RNTI: x = static_cast<double>(r->rnti); break;
                    case Field::TBS_RATE: x = static_cast<double>(r->tbs_bits) / f.src->spacing(r->dir); break;
                    case Field::APP_RATE: {
                        const int side = static_cast<int>(sender_of(r->dir));
                        const auto& app = f.src->app[side];
                        auto& c = cursor[side];
                        while (c < app.size() && app[c]->ts <= r->ts) held[side] = app[c++]->app_send_rate_bps;
                        x = held[side];
                        break;
                    }
                    default: break;
                }
                out.v.push_back(x);
            }
            break;
        }
    }
    return out;
}

std::int8_t compare(double a, double b, Op op) {
    if (std::isnan(a) || std::isnan(b)) return -1;
    switch (op) {
        case Op::EQ: return a == b;
        case Op::NE: return a != b;
        case Op::LT: return a < b;
        case Op::LE: return a <= b;
        case Op::GT: return a > b;
        case Op::GE: return a >= b;
        default: return -1;
    }
}

double arith(double a, double b, Op op) {
    switch (op) {
        case Op::ADD: return a + b;
        case Op::SUB: return a - b;
        case Op::MUL: return a * b;
        case Op::DIV: return a / b;
        default: return kNaN;
    }
}

std::int8_t logic(std::int8_t a, std::int8_t b, Op op) {
    if (a < 0 || b < 0) return -1;
    return op == Op::AND ? (a && b) : (a || b);
}

std::size_t bucket_count_arg(double n) {
    if (!(n >= 1)) throw std::invalid_argument("bucket size must be at least 1");
    return static_cast<std::size_t>(n);
}

Value eval(const TNode& n, const Frame& f) {
    switch (n.op) {
        case Op::NUM: return scalar(n.num);
        case Op::BOOL: return boolean(n.b);
        case Op::PARAM: return scalar(*f.cfg->get(n.param));
        case Op::FIELD:
            return field_values(f, n.field, n.type == VType::BSERIES);
        case Op::NEG: {
            auto a = eval(n.kids[0], f);
            if (a.type == VType::SCALAR) a.num = -a.num;
            else
                for (auto& x : a.v) x = -x;
            return a;
        }
        case Op::NOT: {
            auto a = eval(n.kids[0], f);
            if (a.type == VType::BOOL) a.b = !a.b;
            else
                for (auto& x : a.bv) x = x < 0 ? -1 : !x;
            return a;
        }
        case Op::ADD:
        case Op::SUB:
        case Op::MUL:
        case Op::DIV: {
            auto a = eval(n.kids[0], f);
            auto b = eval(n.kids[1], f);
            if (a.type == VType::SCALAR && b.type == VType::SCALAR) return scalar(arith(a.num, b.num, n.op));
            if (a.type == VType::SERIES && b.type == VType::SERIES) {
                for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] = arith(a.v[i], b.v[i], n.op);
                return a;
            }
            if (a.type == VType::SERIES) {
                for (auto& x : a.v) x = arith(x, b.num, n.op);
                return a;
            }
            for (auto& x : b.v) x = arith(a.num, x, n.op);
            return b;
        }
        case Op::EQ:
        case Op::NE:
        case Op::LT:
        case Op::LE:
        case Op::GT:
        case Op::GE: {
            auto a = eval(n.kids[0], f);
            auto b = eval(n.kids[1], f);
            if (a.type == VType::SCALAR && b.type == VType::SCALAR) return boolean(compare(a.num, b.num, n.op) == 1);
            Value out;
            out.type = VType::BSERIES;
            const auto& base = a.type == VType::SERIES ? a : b;
            out.ts = base.ts;
            out.bv.resize(base.v.size());
            for (std::size_t i = 0; i < base.v.size(); ++i) {
                const double x = a.type == VType::SERIES ? a.v[i] : a.num;
                const double y = b.type == VType::SERIES ? b.v[i] : b.num;
                out.bv[i] = compare(x, y, n.op);
            }
            return out;
        }
        case Op::AND:
        case Op::OR: {
            if (n.type == VType::BOOL) {
                const bool a = eval(n.kids[0], f).b;
                if (n.op == Op::AND && !a) return boolean(false);
                if (n.op == Op::OR && a) return boolean(true);
                return boolean(eval(n.kids[1], f).b);
            }
            auto a = eval(n.kids[0], f);
            auto b = eval(n.kids[1], f);
            for (std::size_t i = 0; i < a.bv.size(); ++i) a.bv[i] = logic(a.bv[i], b.bv[i], n.op);
            return a;
        }
        case Op::WHERE: {
            auto a = eval(n.kids[0], f);
            auto keep = eval(n.kids[1], f);
            Value out;
            out.type = a.type;
            for (std::size_t i = 0; i < keep.bv.size(); ++i) {
                if (keep.bv[i] != 1) continue;
                out.ts.push_back(a.ts[i]);
                if (a.type == VType::SERIES) out.v.push_back(a.v[i]);
                else out.bv.push_back(a.bv[i]);
            }
            return out;
        }
        case Op::MAX:
        case Op::MIN:
        case Op::ARGMAX:
        case Op::ARGMIN: {
            const auto a = eval(n.kids[0], f);
            if (a.v.empty()) return scalar(kNaN);
            const bool hi = n.op == Op::MAX || n.op == Op::ARGMAX;
            const auto idx = hi ? first_argmax(a.v) : first_argmin(a.v);
            if (n.op == Op::MAX || n.op == Op::MIN) return scalar(a.v[static_cast<std::size_t>(idx)]);
            return scalar(static_cast<double>(idx));
        }
        case Op::SUM:
        case Op::MEAN: {
            const auto a = eval(n.kids[0], f);
            double s = 0;
            for (double x : a.v) s += x;
            if (n.op == Op::SUM) return scalar(s);
            return scalar(a.v.empty() ? kNaN : s / static_cast<double>(a.v.size()));
        }
        case Op::COUNT_ALL: return scalar(static_cast<double>(f.size()));
        case Op::COUNT:
        case Op::FRAC:
        case Op::EXISTS:
        case Op::FORALL: {
            const auto a = eval(n.kids[0], f);
            std::size_t yes = 0, defined = 0;
            for (auto x : a.bv) {
                if (x < 0) continue;
                ++defined;
                if (x) ++yes;
            }
            switch (n.op) {
                case Op::COUNT: return scalar(static_cast<double>(yes));
                case Op::FRAC: return scalar(defined ? static_cast<double>(yes) / static_cast<double>(defined) : kNaN);
                case Op::EXISTS: return boolean(yes > 0);
                default: return boolean(yes == defined);
            }
        }
        case Op::PERCENTILE: {
            auto a = eval(n.kids[0], f);
            return scalar(percentile_nearest_rank(std::move(a.v), eval(n.kids[1], f).num));
        }
        case Op::ADJ_DROP:
        case Op::ADJ_RISE:
        case Op::ADJ_CHANGE: {
            const auto a = eval(n.kids[0], f);
            for (std::size_t i = 0; i + 1 < a.v.size(); ++i) {
                const double x = a.v[i], y = a.v[i + 1];
                if ((n.op == Op::ADJ_DROP && y < x) || (n.op == Op::ADJ_RISE && y > x) ||
                    (n.op == Op::ADJ_CHANGE && y != x))
                    return boolean(true);
            }
            return boolean(false);
        }
        case Op::TREND_UP:
        case Op::BUCKET_MEAN: {
            const auto a = eval(n.kids[0], f);
            const auto count = bucket_count_arg(eval(n.kids[1], f).num);
            auto means = bucket_mean(a.v, count);
            if (n.op == Op::TREND_UP) {
                for (std::size_t i = 0; i + 1 < means.size(); ++i)
                    if (means[i + 1] > means[i]) return boolean(true);
                return boolean(false);
            }
            Value out;
            out.type = VType::SERIES;
            out.v = std::move(means);
            for (std::size_t g = 0; g < out.v.size(); ++g) out.ts.push_back(a.ts[g * count]);
            return out;
        }
        case Op::BUCKET_PCT: {
            const auto a = eval(n.kids[0], f);
            const double ms = eval(n.kids[1], f).num;
            const double p = eval(n.kids[2], f).num;
            const std::int64_t bin = seconds_to_micros(ms * 1e-3);
            if (bin <= 0) throw std::invalid_argument("bucket duration must be positive");
            Value out;
            out.type = VType::SERIES;
            std::size_t i = 0;
            std::vector<double> bucket;
            while (i < a.v.size()) {
                const std::int64_t offset = a.ts[i] - f.origin.micros;
                const std::int64_t k = offset >= 0 ? offset / bin : -((-offset + bin - 1) / bin);
                const std::int64_t end = f.origin.micros + (k + 1) * bin;
                bucket.clear();
                while (i < a.v.size() && a.ts[i] < end) bucket.push_back(a.v[i++]);
                out.v.push_back(percentile_nearest_rank(bucket, p));
                out.ts.push_back(end - bin);
            }
            return out;
        }
    }
    return scalar(kNaN);
}

// ---- type checking ----

class Checker {
public:
    explicit Checker(Group g) : group_(g) {}

    TNode check(const Expr& e) {
        TNode n;
        switch (e.kind) {
            case Expr::Kind::NUMBER:
                n.op = Op::NUM;
                n.num = e.number;
                return n;
            case Expr::Kind::BOOLEAN:
                n.op = Op::BOOL;
                n.type = VType::BOOL;
                n.b = e.boolean;
                return n;
            case Expr::Kind::PARAM: {
                const auto& keys = DetectorConfig::keys();
                if (std::find(keys.begin(), keys.end(), e.text) == keys.end())
                    throw SpecError(fmt::format("unknown parameter '${}'", e.text), e.loc);
                n.op = Op::PARAM;
                n.param = e.text;
                return n;
            }
            case Expr::Kind::NAME: return name(e);
            case Expr::Kind::UNARY: {
                auto a = check(*e.args[0]);
                if (e.text == "not") {
                    require(a, {VType::BOOL, VType::BSERIES}, *e.args[0], "'not'");
                    n.op = Op::NOT;
                } else {
                    require(a, {VType::SCALAR, VType::SERIES}, *e.args[0], "unary '-'");
                    n.op = Op::NEG;
                }
                n.type = a.type;
                n.derived = a.derived;
                n.kids.push_back(std::move(a));
                return n;
            }
            case Expr::Kind::BINARY: return binary(e);
            case Expr::Kind::CALL: return call(e);
        }
        return n;
    }

private:
    static bool is_series(const TNode& n) { return n.type == VType::SERIES || n.type == VType::BSERIES; }

    static void require(const TNode& n, std::initializer_list<VType> allowed, const Expr& at, std::string_view what) {
        if (std::find(allowed.begin(), allowed.end(), n.type) != allowed.end()) return;
        std::string list;
        for (auto t : allowed) list += (list.empty() ? "" : " or ") + std::string(to_string(t));
        throw SpecError(fmt::format("{} expects {}, got {}", what, list, to_string(n.type)), at.loc);
    }

    static void aligned(const TNode& a, const TNode& b, const Expr& at) {
        if (is_series(a) && is_series(b) && (a.derived || b.derived))
            throw SpecError("cannot combine a filtered or bucketed series element-wise with another series", at.loc);
    }

    TNode name(const Expr& e) {
        TNode n;
        for (const auto& f : kFields) {
            if (e.text == f.name) {
                if (f.group != group_)
                    throw SpecError(fmt::format("unknown field '{}' for this stream", e.text), e.loc);
                n.op = Op::FIELD;
                n.field = f.field;
                n.type = f.boolean ? VType::BSERIES : VType::SERIES;
                return n;
            }
        }
        if (group_ == Group::APP) {
            if (e.text == "normal" || e.text == "overuse" || e.text == "underuse") {
                n.op = Op::NUM;
                n.num = e.text == "normal" ? 0 : e.text == "overuse" ? 1 : 2;
                return n;
            }
        }
        throw SpecError(fmt::format("unknown field '{}'", e.text), e.loc);
    }

    TNode binary(const Expr& e) {
        auto a = check(*e.args[0]);
        auto b = check(*e.args[1]);
        TNode n;
        const auto& op = e.text;
        if (op == "where") {
            require(a, {VType::SERIES, VType::BSERIES}, *e.args[0], "'where'");
            require(b, {VType::BSERIES}, *e.args[1], "'where' filter");
            aligned(a, b, e);
            n.op = Op::WHERE;
            n.type = a.type;
            n.derived = true;
        } else if (op == "and" || op == "or") {
            require(a, {VType::BOOL, VType::BSERIES}, *e.args[0], fmt::format("'{}'", op));
            require(b, {a.type}, *e.args[1], fmt::format("'{}'", op));
            aligned(a, b, e);
            n.op = op == "and" ? Op::AND : Op::OR;
            n.type = a.type;
            n.derived = a.derived || b.derived;
        } else if (op == "+" || op == "-" || op == "*" || op == "/") {
            require(a, {VType::SCALAR, VType::SERIES}, *e.args[0], fmt::format("'{}'", op));
            require(b, {VType::SCALAR, VType::SERIES}, *e.args[1], fmt::format("'{}'", op));
            aligned(a, b, e);
            n.op = op == "+" ? Op::ADD : op == "-" ? Op::SUB : op == "*" ? Op::MUL : Op::DIV;
            n.type = (is_series(a) || is_series(b)) ? VType::SERIES : VType::SCALAR;
            n.derived = a.derived || b.derived;
        } else {
            require(a, {VType::SCALAR, VType::SERIES}, *e.args[0], fmt::format("'{}'", op));
            require(b, {VType::SCALAR, VType::SERIES}, *e.args[1], fmt::format("'{}'", op));
            aligned(a, b, e);
            n.op = op == "==" ? Op::EQ : op == "!=" ? Op::NE : op == "<" ? Op::LT : op == "<=" ? Op::LE
                 : op == ">" ? Op::GT : Op::GE;
            n.type = (is_series(a) || is_series(b)) ? VType::BSERIES : VType::BOOL;
            n.derived = a.derived || b.derived;
        }
        n.kids.push_back(std::move(a));
        n.kids.push_back(std::move(b));
        return n;
    }

    void arity(const Expr& e, std::size_t lo, std::size_t hi) {
        if (e.args.size() < lo || e.args.size() > hi)
            throw SpecError(lo == hi ? fmt::format("{}() takes {} argument{}", e.text, lo, lo == 1 ? "" : "s")
                                     : fmt::format("{}() takes {} to {} arguments", e.text, lo, hi),
                            e.loc);
    }

    void positional(const Expr& e, std::size_t from = 0) {
        for (std::size_t i = from; i < e.arg_names.size(); ++i)
            if (!e.arg_names[i].empty())
                throw SpecError(fmt::format("{}() has no argument named '{}'", e.text, e.arg_names[i]), e.args[i]->loc);
    }

    TNode constant_arg(const Expr& arg, std::string_view what) {
        auto n = check(arg);
        if (n.op != Op::NUM && n.op != Op::PARAM && !(n.op == Op::NEG && n.kids[0].op == Op::NUM))
            throw SpecError(fmt::format("{} must be a number or $parameter", what), arg.loc);
        if (n.op == Op::NUM && !(n.num > 0)) throw SpecError(fmt::format("{} must be positive", what), arg.loc);
        return n;
    }

    TNode call(const Expr& e) {
        TNode n;
        const auto& fn = e.text;
        auto one_series = [&](Op op, VType result) {
            arity(e, 1, 1);
            positional(e);
            auto a = check(*e.args[0]);
            require(a, {VType::SERIES}, *e.args[0], fn + "()");
            n.op = op;
            n.type = result;
            n.kids.push_back(std::move(a));
            return n;
        };
        auto one_bool_series = [&](Op op, VType result) {
            arity(e, 1, 1);
            positional(e);
            auto a = check(*e.args[0]);
            require(a, {VType::BSERIES}, *e.args[0], fn + "()");
            n.op = op;
            n.type = result;
            n.kids.push_back(std::move(a));
            return n;
        };
        if (fn == "max") return one_series(Op::MAX, VType::SCALAR);
        if (fn == "min") return one_series(Op::MIN, VType::SCALAR);
        if (fn == "sum") return one_series(Op::SUM, VType::SCALAR);
        if (fn == "mean") return one_series(Op::MEAN, VType::SCALAR);
        if (fn == "argmax") return one_series(Op::ARGMAX, VType::SCALAR);
        if (fn == "argmin") return one_series(Op::ARGMIN, VType::SCALAR);
        if (fn == "adjacent_drop") return one_series(Op::ADJ_DROP, VType::BOOL);
        if (fn == "adjacent_rise") return one_series(Op::ADJ_RISE, VType::BOOL);
        if (fn == "adjacent_change") return one_series(Op::ADJ_CHANGE, VType::BOOL);
        if (fn == "frac") return one_bool_series(Op::FRAC, VType::SCALAR);
        if (fn == "exists") return one_bool_series(Op::EXISTS, VType::BOOL);
        if (fn == "forall") return one_bool_series(Op::FORALL, VType::BOOL);
        if (fn == "count") {
            if (e.args.empty()) {
                n.op = Op::COUNT_ALL;
                return n;
            }
            return one_bool_series(Op::COUNT, VType::SCALAR);
        }
        if (fn == "percentile") {
            arity(e, 2, 2);
            positional(e);
            auto a = check(*e.args[0]);
            require(a, {VType::SERIES}, *e.args[0], "percentile()");
            n.op = Op::PERCENTILE;
            n.kids.push_back(std::move(a));
            n.kids.push_back(constant_arg(*e.args[1], "percentile rank"));
            return n;
        }
        if (fn == "trend_up" || fn == "bucket_mean") {
            arity(e, fn == "trend_up" ? 1 : 2, 2);
            if (e.args.size() == 2 && e.arg_names[1] != "bucket" && !e.arg_names[1].empty())
                throw SpecError(fmt::format("{}() has no argument named '{}'", fn, e.arg_names[1]), e.args[1]->loc);
            if (!e.arg_names[0].empty())
                throw SpecError(fmt::format("{}() has no argument named '{}'", fn, e.arg_names[0]), e.args[0]->loc);
            auto a = check(*e.args[0]);
            require(a, {VType::SERIES}, *e.args[0], fn + "()");
            n.op = fn == "trend_up" ? Op::TREND_UP : Op::BUCKET_MEAN;
            n.type = fn == "trend_up" ? VType::BOOL : VType::SERIES;
            n.derived = fn == "bucket_mean";
            n.kids.push_back(std::move(a));
            if (e.args.size() == 2) {
                n.kids.push_back(constant_arg(*e.args[1], "bucket size"));
                if (n.kids[1].op == Op::NUM && n.kids[1].num != std::floor(n.kids[1].num))
                    throw SpecError("bucket size must be an integer", e.args[1]->loc);
            } else {
                TNode p;
                p.op = Op::PARAM;
                p.param = "trend_bucket";
                n.kids.push_back(std::move(p));
            }
            return n;
        }
        if (fn == "bucket_pct") {
            arity(e, 3, 3);
            positional(e);
            auto a = check(*e.args[0]);
            require(a, {VType::SERIES}, *e.args[0], "bucket_pct()");
            n.op = Op::BUCKET_PCT;
            n.type = VType::SERIES;
            n.derived = true;
            n.kids.push_back(std::move(a));
            n.kids.push_back(constant_arg(*e.args[1], "bucket duration (ms)"));
            n.kids.push_back(constant_arg(*e.args[2], "percentile rank"));
            return n;
        }
        throw SpecError(fmt::format("unknown function '{}'", fn), e.loc);
    }

    Group group_;
};

}  // namespace

class CompiledCondition {
public:
    CompiledCondition(TNode root, StreamId stream) : root_(std::move(root)), stream_(stream) {}

    bool evaluate(const Source& src, Selector sel, std::optional<Direction> fixed_dir, bool merged,
                  const DetectorConfig& cfg) const {
        Frame f;
        f.src = &src;
        f.group = group_of(stream_);
        f.origin = src.view->window.start;
        f.cfg = &cfg;
        std::optional<Direction> dir = fixed_dir;
        if (sel.kind == Selector::Kind::DIR) dir = sel.dir;
        switch (stream_) {
            case StreamId::APP: f.app = src.app[static_cast<int>(sel.side)]; break;
            case StreamId::MEDIA:
            case StreamId::RTCP: {
                const int kind = stream_ == StreamId::MEDIA ? 0 : 1;
                f.pkts = merged || !dir ? src.pkts_merged[kind] : src.pkts[kind][static_cast<int>(*dir)];
                break;
            }
            case StreamId::RAN: f.ran = merged || !dir ? src.own_merged : src.own[static_cast<int>(*dir)]; break;
            case StreamId::RAN_ALL: f.ran = merged || !dir ? src.all_merged : src.all[static_cast<int>(*dir)]; break;
        }
        return eval(root_, f).b;
    }

private:
    TNode root_;
    StreamId stream_;
};

namespace {

std::string key_of(const Statement& s) {
    return std::visit(
        [](const auto& d) -> std::string {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, EventDef>) return "event:" + d.name;
            else if constexpr (std::is_same_v<T, NodeDef>) return "node:" + d.name;
            else if constexpr (std::is_same_v<T, ChainDef>) return "chain:" + d.name;
            else return "edge:" + d.from.name + "->" + d.to.front().name;
        },
        s);
}

void merge_into(std::vector<DetectionPlan::Item>& items, const SpecAst& ast, bool from_source) {
    auto put = [&](Statement s) {
        const auto key = key_of(s);
        for (auto& it : items) {
            if (key_of(it.statement) == key) {
                it.statement = std::move(s);
                it.from_source = from_source;
                return;
            }
        }
        items.push_back({std::move(s), from_source});
    };
    for (const auto& st : ast.statements) {
        if (const auto* edge = std::get_if<EdgeDef>(&st)) {
            for (const auto& to : edge->to) put(EdgeDef{edge->from, {to}, edge->loc});
        } else {
            put(st);
        }
    }
}

const SpecAst& builtin_ast() {
    static const SpecAst ast = parse(builtin_spec_source());
    return ast;
}

Selector::Kind kind_of(const EventDef& d) {
    if (d.side == SideSpec::EACH) return Selector::Kind::SIDE;
    if (d.dir == DirSpec::EACH) return Selector::Kind::DIR;
    return Selector::Kind::NONE;
}

bool binding_fits(Binding b, Selector::Kind k) {
    switch (b) {
        case Binding::NONE: return k == Selector::Kind::NONE;
        case Binding::SIDE_SENDER:
        case Binding::SIDE_RECEIVER:
        case Binding::SIDE_LOCAL:
        case Binding::SIDE_REMOTE: return k == Selector::Kind::SIDE;
        case Binding::DIR_PATH:
        case Binding::DIR_UL:
        case Binding::DIR_DL: return k == Selector::Kind::DIR;
    }
    return false;
}

Binding default_binding(Selector::Kind k) {
    switch (k) {
        case Selector::Kind::SIDE: return Binding::SIDE_SENDER;
        case Selector::Kind::DIR: return Binding::DIR_PATH;
        case Selector::Kind::NONE: break;
    }
    return Binding::NONE;
}

bool reachable(const CausalGraph& g, const std::string& from, const std::string& to) {
    std::vector<std::string> stack{from};
    std::set<std::string> seen;
    while (!stack.empty()) {
        auto id = stack.back();
        stack.pop_back();
        if (id == to) return true;
        if (!seen.insert(id).second) continue;
        for (auto& s : g.successors(id)) stack.push_back(s);
    }
    return false;
}

}  // namespace

DetectionPlan compile(const SpecAst& ast) {
    DetectionPlan plan;
    merge_into(plan.items_, builtin_ast(), false);
    merge_into(plan.items_, ast, true);

    // Events and slot layout.
    std::map<std::string, std::size_t> event_index;
    for (const auto& item : plan.items_) {
        const auto* def = std::get_if<EventDef>(&item.statement);
        if (!def) continue;
        const auto stream = stream_from_name(def->stream);
        if (!stream)
            throw SpecError(fmt::format("unknown stream '{}' (app, media, rtcp, ran, ran_all)", def->stream),
                            def->stream_loc);
        if (*stream == StreamId::APP) {
            if (def->side == SideSpec::NONE)
                throw SpecError("app events need 'side local|remote|each'", def->stream_loc);
            if (def->dir != DirSpec::NONE) throw SpecError("app events take a side, not a direction", def->stream_loc);
        } else if (def->side != SideSpec::NONE) {
            throw SpecError(fmt::format("stream '{}' takes a direction, not a side", def->stream), def->stream_loc);
        }
        Checker checker(group_of(*stream));
        auto root = checker.check(*def->condition);
        if (root.type != VType::BOOL)
            throw SpecError(fmt::format("condition must be boolean, got {}", to_string(root.type)), def->condition->loc);

        PlanEvent ev;
        ev.def = *def;
        ev.selector_kind = kind_of(*def);
        ev.first_slot = static_cast<int>(plan.layout_.size());
        ev.slot_count = ev.selector_kind == Selector::Kind::NONE ? 1 : 2;
        ev.from_source = item.from_source;
        ev.condition = std::make_shared<CompiledCondition>(std::move(root), *stream);
        switch (ev.selector_kind) {
            case Selector::Kind::SIDE:
                plan.layout_.push_back({def->name, Selector::of(Side::LOCAL)});
                plan.layout_.push_back({def->name, Selector::of(Side::REMOTE)});
                break;
            case Selector::Kind::DIR:
                plan.layout_.push_back({def->name, Selector::of(Direction::UL)});
                plan.layout_.push_back({def->name, Selector::of(Direction::DL)});
                break;
            case Selector::Kind::NONE: plan.layout_.push_back({def->name, Selector::none()}); break;
        }
        event_index[def->name] = plan.events_.size();
        plan.events_.push_back(std::move(ev));
    }

    auto event_kind = [&](const std::string& name, SourceLoc loc) {
        auto it = event_index.find(name);
        if (it == event_index.end()) throw SpecError(fmt::format("unknown event '{}'", name), loc);
        return plan.events_[it->second].selector_kind;
    };

    // Declared nodes.
    for (const auto& item : plan.items_) {
        const auto* def = std::get_if<NodeDef>(&item.statement);
        if (!def) continue;
        const auto k = event_kind(def->event, def->event_loc);
        if (!binding_fits(def->binding, k))
            throw SpecError(fmt::format("node '{}': event '{}' needs {}", def->name, def->event,
                                        k == Selector::Kind::SIDE  ? "a side binding (side sender|receiver|local|remote)"
                                        : k == Selector::Kind::DIR ? "a direction binding (dir path|ul|dl)"
                                                                   : "no binding"),
                            def->loc);
        plan.graph_.add_node({def->name, def->kind, def->event, def->binding, def->flip});
    }

    auto add_edge = [&](const NameRef& from, const NameRef& to) {
        if (!plan.graph_.find(from.name)) throw SpecError(fmt::format("unknown node '{}'", from.name), from.loc);
        if (!plan.graph_.find(to.name)) throw SpecError(fmt::format("unknown node '{}'", to.name), to.loc);
        if (plan.graph_.has_edge(from.name, to.name)) return;
        if (from.name == to.name || reachable(plan.graph_, to.name, from.name))
            throw SpecError(fmt::format("edge {} -> {} creates a cycle", from.name, to.name), to.loc);
        try {
            plan.graph_.add_edge(from.name, to.name);
        } catch (const GraphError& e) {
            throw SpecError(e.what(), to.loc);
        }
    };

    // Edges and chains, in order; 'all' sees the graph built so far.
    std::vector<ChainPath> chains;
    auto add_chain = [&](const ChainPath& p) {
        if (std::find(chains.begin(), chains.end(), p) == chains.end()) chains.push_back(p);
    };
    for (const auto& item : plan.items_) {
        if (const auto* edge = std::get_if<EdgeDef>(&item.statement)) {
            for (const auto& to : edge->to) add_edge(edge->from, to);
            continue;
        }
        const auto* def = std::get_if<ChainDef>(&item.statement);
        if (!def) continue;
        if (def->all) {
            for (const auto& p : enumerate_chains(plan.graph_)) add_chain(p);
            continue;
        }
        std::set<std::string> seen;
        ChainPath path;
        for (std::size_t i = 0; i < def->nodes.size(); ++i) {
            const auto& ref = def->nodes[i];
            if (!seen.insert(ref.name).second)
                throw SpecError(fmt::format("chain '{}' visits node '{}' twice", def->name, ref.name), ref.loc);
            const NodeKind want = i == 0 ? NodeKind::CAUSE
                                : i + 1 == def->nodes.size() ? NodeKind::CONSEQUENCE
                                                             : NodeKind::INTERMEDIATE;
            if (const auto* n = plan.graph_.find(ref.name)) {
                if (n->kind != want)
                    throw SpecError(fmt::format("node '{}' is a {} but appears as {} in chain '{}'", ref.name,
                                                to_string(n->kind), to_string(want), def->name),
                                    ref.loc);
            } else {
                if (!event_index.count(ref.name))
                    throw SpecError(fmt::format("unknown node or event '{}'", ref.name), ref.loc);
                const auto k = plan.events_[event_index[ref.name]].selector_kind;
                plan.graph_.add_node({ref.name, want, ref.name, default_binding(k), false});
            }
            path.nodes.push_back(ref.name);
        }
        for (std::size_t i = 0; i + 1 < def->nodes.size(); ++i) add_edge(def->nodes[i], def->nodes[i + 1]);
        add_chain(path);
    }
    plan.chains_ = std::move(chains);

    try {
        (void)plan.matcher();
    } catch (const GraphError& e) {
        throw SpecError(e.what(), SourceLoc{1, 1});
    }
    return plan;
}

DetectionPlan compile_source(std::string_view source) { return compile(parse(source)); }

SlotResolver DetectionPlan::resolver() const {
    // Copies the small event table so the resolver outlives the plan.
    std::vector<std::tuple<std::string, Selector::Kind, int>> table;
    for (const auto& e : events_) table.emplace_back(e.def.name, e.selector_kind, e.first_slot);
    return [table = std::move(table)](const std::string& event, Selector sel) -> std::optional<int> {
        for (const auto& [name, kind, first] : table) {
            if (name != event) continue;
            if (kind != sel.kind) return std::nullopt;
            switch (kind) {
                case Selector::Kind::NONE: return first;
                case Selector::Kind::SIDE: return first + static_cast<int>(sel.side);
                case Selector::Kind::DIR: return first + static_cast<int>(sel.dir);
            }
        }
        return std::nullopt;
    };
}

ChainMatcher DetectionPlan::matcher() const { return ChainMatcher(graph_, chains_, resolver()); }

FeatureVector DetectionPlan::evaluate(const WindowView& view, const DetectorConfig& cfg) const {
    const Source src(view);
    FeatureVector fv(layout_.size());
    for (const auto& ev : events_) {
        const auto& c = *ev.condition;
        const auto slot = static_cast<std::size_t>(ev.first_slot);
        switch (ev.selector_kind) {
            case Selector::Kind::SIDE:
                fv.set(slot, c.evaluate(src, Selector::of(Side::LOCAL), std::nullopt, false, cfg));
                fv.set(slot + 1, c.evaluate(src, Selector::of(Side::REMOTE), std::nullopt, false, cfg));
                break;
            case Selector::Kind::DIR:
                fv.set(slot, c.evaluate(src, Selector::of(Direction::UL), std::nullopt, false, cfg));
                fv.set(slot + 1, c.evaluate(src, Selector::of(Direction::DL), std::nullopt, false, cfg));
                break;
            case Selector::Kind::NONE: {
                const auto& d = ev.def;
                bool v = false;
                if (d.side == SideSpec::LOCAL || d.side == SideSpec::REMOTE) {
                    v = c.evaluate(src, Selector::of(d.side == SideSpec::LOCAL ? Side::LOCAL : Side::REMOTE),
                                   std::nullopt, false, cfg);
                } else if (d.dir == DirSpec::UL || d.dir == DirSpec::DL) {
                    v = c.evaluate(src, Selector::none(), d.dir == DirSpec::UL ? Direction::UL : Direction::DL, false,
                                   cfg);
                } else if (d.dir == DirSpec::ANY) {
                    v = c.evaluate(src, Selector::none(), Direction::UL, false, cfg) ||
                        c.evaluate(src, Selector::none(), Direction::DL, false, cfg);
                } else {
                    v = c.evaluate(src, Selector::none(), std::nullopt, true, cfg);
                }
                fv.set(slot, v);
                break;
            }
        }
    }
    return fv;
}

}  // namespace domino
