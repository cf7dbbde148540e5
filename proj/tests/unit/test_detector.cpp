#include <gtest/gtest.h>

#include <random>

#include "domino/detector.hpp"
#include "fixtures.hpp"

using namespace domino;
using namespace domino::test;

namespace {

const Selector LOCAL = Selector::of(Side::LOCAL);
const Selector REMOTE = Selector::of(Side::REMOTE);
const Selector UL = Selector::of(Direction::UL);
const Selector DL = Selector::of(Direction::DL);
const Selector NONE = Selector::none();

Trace with_app(std::vector<AppRecord> app) {
    Trace t;
    t.app = std::move(app);
    return t;
}

Trace with_ran(std::vector<RanRecord> ran) {
    Trace t;
    t.ran = std::move(ran);
    return t;
}

Trace with_packets(std::vector<PacketRecord> p) {
    Trace t;
    t.packets = std::move(p);
    return t;
}

auto set_in_fps = [](AppRecord& a, double v) { a.in_fps = v; };
auto set_out_fps = [](AppRecord& a, double v) { a.out_fps = v; };
auto set_res = [](AppRecord& a, double v) { a.out_res_height = static_cast<int>(v); };
auto set_jb = [](AppRecord& a, double v) { a.jitter_buffer_ms = v; };
auto set_target = [](AppRecord& a, double v) {
    a.target_bitrate_bps = v;
    a.pushback_rate_bps = v;
};
auto set_pushback = [](AppRecord& a, double v) { a.pushback_rate_bps = v; };
auto set_outstanding = [](AppRecord& a, double v) { a.outstanding_bytes = static_cast<std::int64_t>(v); };
auto set_tbs = [](RanRecord& r, double v) { r.tbs_bits = static_cast<std::int64_t>(v); };

bool a1(std::vector<double> fps, Selector s = LOCAL) {
    return fires(with_app(app_series(fps, set_in_fps, s.side)), EventId::A1_IN_FPS_DROP, s);
}

/// 20 delays: ten at `lo`, ten at `hi`, giving two bucket means.
std::vector<double> two_buckets(double lo, double hi) {
    std::vector<double> v(10, lo);
    v.insert(v.end(), 10, hi);
    return v;
}

/// Own DL records where `positive` of `n` have a TBS rate below the sender's
/// 1 Mbps send rate. Spacing is 2.5 ms, so 2500 bits equals 1 Mbps.
Trace rate_gap_trace(int n, int positive) {
    Trace t;
    t.app.push_back(app_at(0.05, Side::REMOTE));  // DL media is sent by the remote client
    t.app.back().app_send_rate_bps = 1e6;
    std::vector<double> tbs;
    for (int i = 0; i < n; ++i) tbs.push_back(i < positive ? 2000 : 2500);
    t.ran = ran_series(tbs, set_tbs, Direction::DL);
    return t;
}

/// Own records whose MCS is constant inside each 50 ms bucket.
Trace mcs_buckets(const std::vector<double>& per_bucket, Direction dir = Direction::DL) {
    Trace t;
    for (std::size_t b = 0; b < per_bucket.size(); ++b)
        for (int i = 0; i < 20; ++i) {
            auto r = ran_at(0.05 * static_cast<double>(b) + 0.0025 * i, dir);
            r.mcs = static_cast<int>(per_bucket[b]);
            t.ran.push_back(r);
        }
    return t;
}

Trace harq_trace(int retx, Direction dir = Direction::DL) {
    Trace t;
    for (int i = 0; i < 40; ++i) {
        auto r = ran_at(0.1 + 0.0025 * i, dir);
        r.harq_retx = i < retx;
        t.ran.push_back(r);
    }
    return t;
}

}  // namespace

// ---------------------------------------------------------------- layout

TEST(Layout, ThirtySixSlotsDecomposed) {
    const auto layout = builtin_layout();
    ASSERT_EQ(layout.size(), 36u);
    EXPECT_EQ(kFeatureCount, 2 * 10 + 6 * 2 + 4);
    int app = 0, radio = 0, single = 0;
    for (int n = 1; n <= kEventCount; ++n) {
        const auto id = event_at(n);
        switch (selector_kind(id)) {
            case Selector::Kind::SIDE:
                ++app;
                EXPECT_EQ(feature_slot(id, LOCAL), 2 * (n - 1));
                EXPECT_EQ(feature_slot(id, REMOTE), 2 * (n - 1) + 1);
                break;
            case Selector::Kind::DIR:
                ++radio;
                EXPECT_EQ(feature_slot(id, UL), 22 + 2 * (n - 13));
                EXPECT_EQ(feature_slot(id, DL), 22 + 2 * (n - 13) + 1);
                break;
            case Selector::Kind::NONE: ++single; break;
        }
    }
    EXPECT_EQ(app, 10);
    EXPECT_EQ(radio, 6);
    EXPECT_EQ(single, 4);
    EXPECT_EQ(feature_slot(EventId::N11_FWD_DELAY_UP, NONE), 20);
    EXPECT_EQ(feature_slot(EventId::N12_REV_DELAY_UP, NONE), 21);
    EXPECT_EQ(feature_slot(EventId::S19_UL_SCHEDULING, NONE), 34);
    EXPECT_EQ(feature_slot(EventId::S20_RRC_CHANGE, NONE), 35);
    EXPECT_EQ(layout[7].label(), "jb_drain.remote");
    EXPECT_EQ(layout[33].label(), "rlc_retx.dl");
}

TEST(Layout, SelectorMismatchIsUsageError) {
    const Trace t;
    const auto v = slice(t, Window{Timestamp{0}, 5});
    EXPECT_THROW(detect(v, EventId::A4_JB_DRAIN, UL, {}), std::invalid_argument);
    EXPECT_THROW(detect(v, EventId::R17_HARQ_RETX, LOCAL, {}), std::invalid_argument);
    EXPECT_THROW(detect(v, EventId::N11_FWD_DELAY_UP, DL, {}), std::invalid_argument);
    EXPECT_THROW(feature_slot(EventId::S20_RRC_CHANGE, UL), std::invalid_argument);
}

TEST(Layout, EventNamesRoundTrip) {
    for (int n = 1; n <= kEventCount; ++n) EXPECT_EQ(event_from_name(event_name(event_at(n))), event_at(n));
    EXPECT_FALSE(event_from_name("nope"));
}

// ---------------------------------------------------------------- A1, A2

TEST(A1InFpsDrop, PeakThenTrough) { EXPECT_TRUE(a1({28, 30, 24})); }
TEST(A1InFpsDrop, TroughBeforePeak) { EXPECT_FALSE(a1({24, 30})); }
TEST(A1InFpsDrop, MaxAtThresholdIsNotAbove) { EXPECT_FALSE(a1({27, 24})); }
TEST(A1InFpsDrop, JustAboveHighThreshold) { EXPECT_TRUE(a1({27.01, 24})); }
TEST(A1InFpsDrop, MinAtThresholdIsNotBelow) { EXPECT_FALSE(a1({28, 25})); }
TEST(A1InFpsDrop, JustBelowLowThreshold) { EXPECT_TRUE(a1({28, 24.99})); }
TEST(A1InFpsDrop, RemoteSideOnly) {
    const auto t = with_app(app_series({30, 20}, set_in_fps, Side::REMOTE));
    EXPECT_TRUE(fires(t, EventId::A1_IN_FPS_DROP, REMOTE));
    EXPECT_FALSE(fires(t, EventId::A1_IN_FPS_DROP, LOCAL));
}

TEST(A2OutFpsDrop, FiresOnDrop) {
    EXPECT_TRUE(fires(with_app(app_series({30, 29, 20}, set_out_fps)), EventId::A2_OUT_FPS_DROP, LOCAL));
}
TEST(A2OutFpsDrop, SteadyAtThirty) {
    EXPECT_FALSE(fires(with_app(app_series({30, 30, 30}, set_out_fps)), EventId::A2_OUT_FPS_DROP, LOCAL));
}
TEST(A2OutFpsDrop, ShallowDipAboveLow) {
    EXPECT_FALSE(fires(with_app(app_series({30, 25, 30}, set_out_fps)), EventId::A2_OUT_FPS_DROP, LOCAL));
}

// ---------------------------------------------------------------- A3 - A10

TEST(A3OutResDrop, AdjacentDecrease) {
    EXPECT_TRUE(fires(with_app(app_series({720, 720, 540}, set_res)), EventId::A3_OUT_RES_DROP, LOCAL));
}
TEST(A3OutResDrop, OnlyIncreases) {
    EXPECT_FALSE(fires(with_app(app_series({360, 540, 720}, set_res)), EventId::A3_OUT_RES_DROP, LOCAL));
}

TEST(A4JbDrain, ZeroPresent) {
    EXPECT_TRUE(fires(with_app(app_series({12, 5, 0, 8}, set_jb)), EventId::A4_JB_DRAIN, LOCAL));
}
TEST(A4JbDrain, NearZeroIsNotZero) {
    EXPECT_FALSE(fires(with_app(app_series({12, 5, 0.001, 8}, set_jb)), EventId::A4_JB_DRAIN, LOCAL));
}
TEST(A4JbDrain, EmptyStreamIsFalse) { EXPECT_FALSE(fires(Trace{}, EventId::A4_JB_DRAIN, LOCAL)); }

TEST(A5TargetDrop, AnyDecrease) {
    EXPECT_TRUE(fires(with_app(app_series({2e6, 2e6, 1.7e6}, set_target)), EventId::A5_TARGET_DROP, LOCAL));
}
TEST(A5TargetDrop, NonDecreasing) {
    EXPECT_FALSE(fires(with_app(app_series({1.7e6, 2e6, 2e6}, set_target)), EventId::A5_TARGET_DROP, LOCAL));
}

TEST(A6GccOveruse, OveruseEntry) {
    auto app = app_series({0, 1, 0}, [](AppRecord& a, double v) { a.gcc_state = v ? GccState::OVERUSE : GccState::NORMAL; });
    EXPECT_TRUE(fires(with_app(app), EventId::A6_GCC_OVERUSE, LOCAL));
}
TEST(A6GccOveruse, UnderuseIsNotOveruse) {
    auto app = app_series({0, 1, 0}, [](AppRecord& a, double v) { a.gcc_state = v ? GccState::UNDERUSE : GccState::NORMAL; });
    EXPECT_FALSE(fires(with_app(app), EventId::A6_GCC_OVERUSE, LOCAL));
}

TEST(A7PushbackDrop, Decrease) {
    EXPECT_TRUE(fires(with_app(app_series({2e6, 1e6}, set_pushback)), EventId::A7_PUSHBACK_DROP, LOCAL));
}
TEST(A7PushbackDrop, Flat) {
    EXPECT_FALSE(fires(with_app(app_series({2e6, 2e6}, set_pushback)), EventId::A7_PUSHBACK_DROP, LOCAL));
}

TEST(A8CwndFull, RatioAboveOne) {
    EXPECT_TRUE(fires(with_app(app_series({50001}, set_outstanding)), EventId::A8_CWND_FULL, LOCAL));
}
TEST(A8CwndFull, RatioExactlyOne) {
    EXPECT_FALSE(fires(with_app(app_series({50000}, set_outstanding)), EventId::A8_CWND_FULL, LOCAL));
}

TEST(A9OutstandingUp, BucketMeanRises) {
    EXPECT_TRUE(fires(with_app(app_series(two_buckets(100, 101), set_outstanding)), EventId::A9_OUTSTANDING_UP, LOCAL));
}
TEST(A9OutstandingUp, BucketMeanFalls) {
    EXPECT_FALSE(fires(with_app(app_series(two_buckets(101, 100), set_outstanding)), EventId::A9_OUTSTANDING_UP, LOCAL));
}
TEST(A9OutstandingUp, RiseInsidePartialBucketIgnored) {
    auto v = two_buckets(100, 100);
    v.resize(19);
    v.back() = 5000;  // 19 samples: one full bucket, the rise sits in the dropped tail
    EXPECT_FALSE(fires(with_app(app_series(v, set_outstanding)), EventId::A9_OUTSTANDING_UP, LOCAL));
}

TEST(A10PushbackNeqTarget, Differs) {
    EXPECT_TRUE(fires(with_app(app_series({2e6, 1.5e6}, set_pushback)), EventId::A10_PUSHBACK_NEQ_TARGET, LOCAL));
}
TEST(A10PushbackNeqTarget, Equal) {
    EXPECT_FALSE(fires(with_app(app_series({2e6, 2e6}, set_pushback)), EventId::A10_PUSHBACK_NEQ_TARGET, LOCAL));
}

// ---------------------------------------------------------------- N11, N12

TEST(N11FwdDelayUp, RisingAboveThreshold) {
    EXPECT_TRUE(fires(with_packets(delay_series(two_buckets(60, 81))), EventId::N11_FWD_DELAY_UP, NONE));
}
TEST(N11FwdDelayUp, RisingButMaxAtThreshold) {
    EXPECT_FALSE(fires(with_packets(delay_series(two_buckets(60, 80))), EventId::N11_FWD_DELAY_UP, NONE));
}
TEST(N11FwdDelayUp, ConstantHighDelayHasNoTrend) {
    EXPECT_FALSE(fires(with_packets(delay_series(two_buckets(200, 200))), EventId::N11_FWD_DELAY_UP, NONE));
}
TEST(N11FwdDelayUp, RtcpDoesNotCount) {
    const auto t = with_packets(delay_series(two_buckets(60, 120), Direction::UL, PacketKind::RTCP));
    EXPECT_FALSE(fires(t, EventId::N11_FWD_DELAY_UP, NONE));
    EXPECT_TRUE(fires(t, EventId::N12_REV_DELAY_UP, NONE));
}
TEST(N12RevDelayUp, MaxAtThreshold) {
    const auto t = with_packets(delay_series(two_buckets(60, 80), Direction::UL, PacketKind::RTCP));
    EXPECT_FALSE(fires(t, EventId::N12_REV_DELAY_UP, NONE));
}
TEST(N12RevDelayUp, FallingDelay) {
    const auto t = with_packets(delay_series(two_buckets(150, 90), Direction::DL, PacketKind::RTCP));
    EXPECT_FALSE(fires(t, EventId::N12_REV_DELAY_UP, NONE));
}

// ---------------------------------------------------------------- R13 - R18

TEST(R13TbsDrop, BelowEightyPercentAfterPeak) {
    EXPECT_TRUE(fires(with_ran(ran_series({1000, 1000, 790}, set_tbs)), EventId::R13_TBS_DROP, DL));
}
TEST(R13TbsDrop, ExactlyEightyPercent) {
    EXPECT_FALSE(fires(with_ran(ran_series({1000, 1000, 800}, set_tbs)), EventId::R13_TBS_DROP, DL));
}
TEST(R13TbsDrop, TroughBeforePeak) {
    EXPECT_FALSE(fires(with_ran(ran_series({790, 1000, 1000}, set_tbs)), EventId::R13_TBS_DROP, DL));
}
TEST(R13TbsDrop, MatchesBruteForceScan) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> tbs(2 + rng() % 12);
        for (auto& v : tbs) v = static_cast<double>(500 + rng() % 1000);
        std::size_t imax = 0, imin = 0;
        for (std::size_t i = 0; i < tbs.size(); ++i) {
            if (tbs[i] > tbs[imax]) imax = i;
            if (tbs[i] < tbs[imin]) imin = i;
        }
        const bool expect = 0.8 * tbs[imax] > tbs[imin] && imax < imin;
        EXPECT_EQ(fires(with_ran(ran_series(tbs, set_tbs)), EventId::R13_TBS_DROP, DL), expect);
    }
}

TEST(R14RateGap, ElevenPercentPositive) {
    EXPECT_TRUE(fires(rate_gap_trace(100, 11), EventId::R14_RATE_GAP, DL));
}
TEST(R14RateGap, TenPercentIsNotAbove) {
    EXPECT_FALSE(fires(rate_gap_trace(100, 10), EventId::R14_RATE_GAP, DL));
}
TEST(R14RateGap, UsesMediaSenderLog) {
    auto t = rate_gap_trace(100, 50);
    t.app.front().side = Side::LOCAL;  // the local log belongs to UL media
    EXPECT_FALSE(fires(t, EventId::R14_RATE_GAP, DL));
}

TEST(R15CrossTraffic, AboveTwentyPercent) {
    Trace t = with_ran({ran_at(0.1), ran_at(0.2), ran_at(0.3, Direction::DL, false)});
    t.ran[0].prb = 50;
    t.ran[1].prb = 50;
    t.ran[2].prb = 21;
    EXPECT_TRUE(fires(t, EventId::R15_CROSS_TRAFFIC, DL));
    t.ran[2].prb = 25;
    EXPECT_TRUE(fires(t, EventId::R15_CROSS_TRAFFIC, DL));
}
TEST(R15CrossTraffic, ExactlyTwentyPercent) {
    Trace t = with_ran({ran_at(0.1), ran_at(0.2), ran_at(0.3, Direction::DL, false)});
    t.ran[0].prb = 50;
    t.ran[1].prb = 50;
    t.ran[2].prb = 20;
    EXPECT_FALSE(fires(t, EventId::R15_CROSS_TRAFFIC, DL));
}
TEST(R15CrossTraffic, OtherDirectionIgnored) {
    Trace t = with_ran({ran_at(0.1), ran_at(0.3, Direction::UL, false)});
    t.ran[0].prb = 10;
    t.ran[1].prb = 30;
    EXPECT_FALSE(fires(t, EventId::R15_CROSS_TRAFFIC, DL));
    EXPECT_TRUE(fires(t, EventId::R15_CROSS_TRAFFIC, UL));  // no own UL PRB at all
}

TEST(R16PoorChannel, ElevenLowBuckets) {
    EXPECT_TRUE(fires(mcs_buckets(std::vector<double>(11, 5)), EventId::R16_CHANNEL_DEGRADED, DL));
}
TEST(R16PoorChannel, TenLowBucketsIsNotMore) {
    EXPECT_FALSE(fires(mcs_buckets(std::vector<double>(10, 5)), EventId::R16_CHANNEL_DEGRADED, DL));
}
TEST(R16PoorChannel, NinetiethPercentileAtTwenty) {
    auto v = std::vector<double>(11, 5);
    v.push_back(20);
    EXPECT_FALSE(fires(mcs_buckets(v), EventId::R16_CHANNEL_DEGRADED, DL));
    v.back() = 19;
    EXPECT_TRUE(fires(mcs_buckets(v), EventId::R16_CHANNEL_DEGRADED, DL));
}
TEST(R16PoorChannel, MedianAtTenIsNotLow) {
    EXPECT_FALSE(fires(mcs_buckets(std::vector<double>(15, 10)), EventId::R16_CHANNEL_DEGRADED, DL));
    EXPECT_TRUE(fires(mcs_buckets(std::vector<double>(15, 9)), EventId::R16_CHANNEL_DEGRADED, DL));
}

TEST(R17HarqRetx, ElevenAboveTen) { EXPECT_TRUE(fires(harq_trace(11), EventId::R17_HARQ_RETX, DL)); }
TEST(R17HarqRetx, TenIsNotAbove) { EXPECT_FALSE(fires(harq_trace(10), EventId::R17_HARQ_RETX, DL)); }
TEST(R17HarqRetx, Harq20Preset) {
    const auto cfg = DetectorConfig::harq20();
    EXPECT_FALSE(fires(harq_trace(20), EventId::R17_HARQ_RETX, DL, cfg));
    EXPECT_TRUE(fires(harq_trace(21), EventId::R17_HARQ_RETX, DL, cfg));
}
TEST(R17HarqRetx, DirectionSpecific) { EXPECT_FALSE(fires(harq_trace(15, Direction::UL), EventId::R17_HARQ_RETX, DL)); }

TEST(R18RlcRetx, FlagPresent) {
    auto t = with_ran({ran_at(0.1), ran_at(0.2)});
    t.ran[1].rlc_retx = true;
    EXPECT_TRUE(fires(t, EventId::R18_RLC_RETX, DL));
    EXPECT_FALSE(fires(t, EventId::R18_RLC_RETX, UL));
}
TEST(R18RlcRetx, NoFlag) { EXPECT_FALSE(fires(with_ran({ran_at(0.1)}), EventId::R18_RLC_RETX, DL)); }

// ---------------------------------------------------------------- S19, S20

TEST(S19UlScheduling, UplinkRecordPresent) {
    EXPECT_TRUE(fires(with_ran({ran_at(0.1, Direction::UL)}), EventId::S19_UL_SCHEDULING, NONE));
}
TEST(S19UlScheduling, DownlinkOnly) {
    EXPECT_FALSE(fires(with_ran({ran_at(0.1, Direction::DL)}), EventId::S19_UL_SCHEDULING, NONE));
}

TEST(S20RrcChange, RntiChanges) {
    auto t = with_ran({ran_at(0.1), ran_at(0.2, Direction::UL)});
    t.ran[1].rnti = 4242;
    EXPECT_TRUE(fires(t, EventId::S20_RRC_CHANGE, NONE));
}
TEST(S20RrcChange, ConstantRnti) {
    EXPECT_FALSE(fires(with_ran({ran_at(0.1), ran_at(0.2), ran_at(0.3)}), EventId::S20_RRC_CHANGE, NONE));
}
TEST(S20RrcChange, OtherUeRntiIgnored) {
    auto t = with_ran({ran_at(0.1), ran_at(0.2, Direction::DL, false), ran_at(0.3)});
    t.ran[1].rnti = 999;
    EXPECT_FALSE(fires(t, EventId::S20_RRC_CHANGE, NONE));
}

// ---------------------------------------------------------------- featurize

TEST(Featurize, IdleWindowOnlyUplinkBit) {
    Trace t;
    for (int i = 0; i < 100; ++i) t.app.push_back(app_at(0.05 * i));
    for (int i = 0; i < 100; ++i) t.app.push_back(app_at(0.05 * i, Side::REMOTE));
    for (int i = 0; i < 1000; ++i) {
        t.ran.push_back(ran_at(0.005 * i, i % 5 == 4 ? Direction::UL : Direction::DL));
        t.ran.back().tbs_bits = 100000;  // radio rate well above the 1 Mbps send rate
    }
    for (int i = 0; i < 500; ++i) t.packets.push_back(pkt_at(0.01 * i, 30, i % 2 ? Direction::UL : Direction::DL));
    const auto fv = featurize(sorted(t), Window{Timestamp{0}, 5}, {});
    ASSERT_EQ(fv.size(), 36u);
    for (std::size_t i = 0; i < 36; ++i) EXPECT_EQ(fv[i], i == 34) << "slot " << i;
}

TEST(Featurize, MissingAppStreamClearsAppSlots) {
    std::mt19937_64 rng(4);
    auto t = random_trace(rng, 5);
    t.app.clear();
    const auto fv = featurize(t, Window{Timestamp{0}, 5}, {});
    for (std::size_t i = 0; i < 20; ++i) EXPECT_FALSE(fv[i]);
}

TEST(Featurize, AgreesWithPerEventDetect) {
    std::mt19937_64 rng(8);
    const auto t = random_trace(rng, 6);
    const auto view = slice(t, Window{sec(0.5), 5});
    const auto fv = featurize(view, {});
    for (const auto& slot : builtin_layout()) {
        const auto id = *event_from_name(slot.event);
        EXPECT_EQ(fv[static_cast<std::size_t>(feature_slot(id, slot.selector))], detect(view, id, slot.selector, {}));
    }
}

TEST(FeaturizeAll, SixtySecondsGives111Windows) {
    Trace t;
    for (int i = 0; i <= 1200; ++i) t.app.push_back(app_at(0.05 * i));
    std::vector<std::string> warnings;
    const auto all = featurize_all(t, {}, 5.0, 0.5, 1, &warnings);
    EXPECT_EQ(all.size(), static_cast<std::size_t>((60.0 - 5.0) / 0.5) + 1);
    EXPECT_EQ(all.size(), 111u);
    EXPECT_TRUE(warnings.empty());
    EXPECT_EQ(all.back().window.start, sec(55));
}

TEST(FeaturizeAll, FiveSecondsGivesOneWindow) {
    Trace t;
    for (int i = 0; i <= 100; ++i) t.app.push_back(app_at(0.05 * i));
    EXPECT_EQ(featurize_all(t, {}).size(), 1u);
}

TEST(FeaturizeAll, ShortTraceWarns) {
    Trace t;
    for (int i = 0; i <= 80; ++i) t.app.push_back(app_at(0.05 * i));
    std::vector<std::string> warnings;
    const auto all = featurize_all(t, {}, 5.0, 0.5, 1, &warnings);
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_EQ(slice(t, all[0].window).app.size(), t.app.size());
}

TEST(FeaturizeAll, ParallelMatchesSerial) {
    std::mt19937_64 rng(12);
    const auto t = random_trace(rng, 20);
    const auto serial = featurize_all(t, {}, 5.0, 0.5, 1);
    const auto parallel = featurize_all(t, {}, 5.0, 0.5, 4);
    ASSERT_EQ(serial.size(), parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].window, parallel[i].window);
        EXPECT_EQ(serial[i].features, parallel[i].features);
    }
}

// ---------------------------------------------------------------- properties

TEST(Properties, Deterministic) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = random_trace(rng, 6);
        const Window w{sec(0.3), 5};
        EXPECT_EQ(featurize(t, w, {}), featurize(t, w, {}));
    }
}

TEST(Properties, RaisingThresholdsNeverAddsBits) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 40; ++trial) {
        const auto t = random_trace(rng, 6);
        const auto view = slice(t, Window{sec(0.5), 5});
        DetectorConfig lo, hi;
        lo.harq_count = static_cast<double>(rng() % 30);
        hi.harq_count = lo.harq_count + static_cast<double>(rng() % 10);
        lo.cross_traffic_frac = 0.01 * static_cast<double>(1 + rng() % 40);
        hi.cross_traffic_frac = lo.cross_traffic_frac + 0.01 * static_cast<double>(rng() % 20);
        for (auto dir : {UL, DL}) {
            if (detect(view, EventId::R17_HARQ_RETX, dir, hi)) {
                EXPECT_TRUE(detect(view, EventId::R17_HARQ_RETX, dir, lo));
            }
            if (detect(view, EventId::R15_CROSS_TRAFFIC, dir, hi)) {
                EXPECT_TRUE(detect(view, EventId::R15_CROSS_TRAFFIC, dir, lo));
            }
        }
    }
}

TEST(Properties, JbDrainEqualsAnyZero) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_trace(rng, 6);
        const Window w{sec(0.1 * static_cast<double>(rng() % 10)), 5};
        const auto view = slice(t, w);
        for (auto side : {Side::LOCAL, Side::REMOTE}) {
            bool any = false;
            for (const auto& a : t.app) any |= w.contains(a.ts) && a.side == side && a.jitter_buffer_ms == 0;
            EXPECT_EQ(detect(view, EventId::A4_JB_DRAIN, Selector::of(side), {}), any);
        }
    }
}

TEST(Properties, DelayEventsNeedHighMax) {
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        auto t = random_trace(rng, 6);
        for (auto& p : t.packets) p.recv_ts.micros = std::min(p.recv_ts.micros, p.send_ts.micros + 80'000);
        const auto view = slice(t, Window{Timestamp{0}, 5});
        EXPECT_FALSE(detect(view, EventId::N11_FWD_DELAY_UP, NONE, {}));
        EXPECT_FALSE(detect(view, EventId::N12_REV_DELAY_UP, NONE, {}));
    }
}

TEST(Properties, TbsScalingLeavesDropUnchanged) {
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 50; ++trial) {
        const auto t = random_trace(rng, 6);
        auto scaled = t;
        const std::int64_t k = 2 + static_cast<std::int64_t>(rng() % 5);
        for (auto& r : scaled.ran) r.tbs_bits *= k;
        const Window w{Timestamp{0}, 5};
        for (auto dir : {UL, DL})
            EXPECT_EQ(detect(slice(t, w), EventId::R13_TBS_DROP, dir, {}),
                      detect(slice(scaled, w), EventId::R13_TBS_DROP, dir, {}));
    }
}

// ---------------------------------------------------------------- config

TEST(DetectorConfig, DefaultsMatchPublishedThresholds) {
    const DetectorConfig c;
    EXPECT_EQ(c.fps_hi, 27);
    EXPECT_EQ(c.fps_lo, 25);
    EXPECT_EQ(c.delay_hi_ms, 80);
    EXPECT_EQ(c.tbs_drop_ratio, 0.8);
    EXPECT_EQ(c.rate_gap_frac, 0.1);
    EXPECT_EQ(c.cross_traffic_frac, 0.2);
    EXPECT_EQ(c.mcs_hi, 20);
    EXPECT_EQ(c.mcs_lo, 10);
    EXPECT_EQ(c.mcs_lo_count, 10);
    EXPECT_EQ(c.mcs_bucket_ms, 50);
    EXPECT_EQ(c.harq_count, 10);
    EXPECT_EQ(c.trend_bucket, 10);
}

TEST(DetectorConfig, Overrides) {
    const auto c = DetectorConfig::from_kv(KvConfig::parse("# thresholds\nharq_count = 3\ndelay_hi_ms=120\n"));
    EXPECT_EQ(c.harq_count, 3);
    EXPECT_EQ(c.delay_hi_ms, 120);
    EXPECT_EQ(c.fps_hi, 27);
}

TEST(DetectorConfig, PresetThenOverride) {
    const auto c = DetectorConfig::from_kv(KvConfig::parse("preset = harq20\nfps_hi = 28\n"));
    EXPECT_EQ(c.harq_count, 20);
    EXPECT_EQ(c.fps_hi, 28);
}

TEST(DetectorConfig, UnknownKeyRejected) {
    try {
        DetectorConfig::from_kv(KvConfig::parse("fps_hi = 27\nfsp_lo = 25\n"));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 2);
    }
}

TEST(DetectorConfig, NonPositiveRejected) {
    EXPECT_THROW(DetectorConfig::from_kv(KvConfig::parse("harq_count = 0\n")), ConfigError);
    EXPECT_THROW(DetectorConfig::from_kv(KvConfig::parse("delay_hi_ms = -1\n")), ConfigError);
    EXPECT_THROW(DetectorConfig::from_kv(KvConfig::parse("delay_hi_ms = fast\n")), ConfigError);
}
