#include <doctest.h>

#include <cmath>
#include <random>

#include "caft/baselines.hpp"
#include "caft/errors.hpp"
#include "support.hpp"

using namespace caft;
using namespace caft::testing;

namespace {

FiveTuple random_tuple(std::mt19937_64& rng) {
    return {static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()),
            static_cast<std::uint16_t>(rng()), static_cast<std::uint16_t>(rng()), 6};
}

}  // namespace

TEST_SUITE("baselines") {
    TEST_CASE("ECMP is flow consistent") {
        std::mt19937_64 rng(1);
        const std::vector<int> ports{0, 1, 2, 3};
        for (int i = 0; i < 1000; ++i) {
            const auto t = random_tuple(rng);
            CHECK(ecmp_select(t, ports, 77) == ecmp_select(t, ports, 77));
        }
    }

    TEST_CASE("ECMP spreads 10^4 flows binomially over four ports") {
        std::mt19937_64 rng(2);
        const std::vector<int> ports{0, 1, 2, 3};
        for (std::uint64_t salt : {0ull, 1ull, 0xdeadbeefull}) {
            std::array<int, 4> count{};
            for (int i = 0; i < 10000; ++i) ++count[static_cast<std::size_t>(ecmp_select(random_tuple(rng), ports, salt))];
            const double bound = 3.0 * std::sqrt(2500.0 * 0.75);
            for (int c : count) CHECK(std::abs(c - 2500) <= bound);
        }
    }

    TEST_CASE("ECMP never picks an excluded port; empty set throws") {
        std::mt19937_64 rng(3);
        const std::vector<int> viable{0, 2, 3};
        for (int i = 0; i < 5000; ++i) CHECK(ecmp_select(random_tuple(rng), viable, 5) != 1);
        CHECK_THROWS_AS(ecmp_select(random_tuple(rng), std::vector<int>{}, 5), std::invalid_argument);
    }

    TEST_CASE("ECMP choice ignores congestion metrics") {
        const auto topo = FatTree::build(8, 1, 1e9);
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 300; ++trial) {
            const auto [s, d] = random_pair(topo, rng);
            const auto flow = make_flow(topo, static_cast<std::uint64_t>(trial), s, d);
            Fabric a(topo, FabricParams{}), b(topo, FabricParams{});
            LoadMap::random(topo, a, rng);
            LoadMap::random(topo, b, rng);
            EcmpScheme ecmp;
            walk(ecmp, a, flow);
            walk(ecmp, b, flow);
            CHECK(ecmp.data_path(a, flow) == ecmp.data_path(b, flow));
        }
    }

    TEST_CASE("Expeditus equals the two-stage oracle on static metrics") {
        std::mt19937_64 rng(5);
        for (int k : {4, 8}) {
            const auto topo = FatTree::build(k, 1, 1e9);
            for (int trial = 0; trial < 2000; ++trial) {
                Fabric fabric(topo, FabricParams{{}, 4096, static_cast<std::uint64_t>(trial)});
                ExpeditusScheme exp;
                const auto m = LoadMap::random(topo, fabric, rng, trial % 2 ? 7 : 2);
                const auto [s, d] = random_pair(topo, rng);
                const auto flow = make_flow(topo, static_cast<std::uint64_t>(trial), s, d);
                const auto w = walk(exp, fabric, flow);
                REQUIRE(w.notice(Notice::Kind::path_decided).has_value());
                const auto path = exp.data_path(fabric, flow);
                REQUIRE(path.has_value());
                const auto want = expeditus_oracle(topo, m, s, d);
                CHECK(path->agg_index == want.agg);
                CHECK(path->core_member == want.core);
                for (const auto& h : w.hops) {
                    const auto noc = h.noc;
                    if (h.kind == MessageKind::exp_request) CHECK(noc == static_cast<std::size_t>(topo.half()));
                    if (h.kind == MessageKind::exp_response && topo.link(h.link).kind == LinkKind::tor_up) CHECK(noc == 0);
                }
            }
        }
    }

    TEST_CASE("Optimal equals exhaustive search, never worse than CAFT") {
        std::mt19937_64 rng(6);
        for (int k : {4, 8}) {
            const auto topo = FatTree::build(k, 1, 1e9);
            for (int trial = 0; trial < 3000; ++trial) {
                Fabric fabric(topo, FabricParams{});
                if (trial % 3 == 0)
                    for (const auto& l : FailurePlan::random(topo, 1 + trial % 5, rng()).links)
                        fabric.fail_link(l.pod, l.agg, l.member);
                const auto m = LoadMap::random(topo, fabric, rng, trial % 2 ? 7 : 3);
                const auto [s, d] = random_pair(topo, rng);
                const auto got = optimal_select(topo, fabric.snapshot(), s, d);
                const auto want = brute_force_optimal(topo, m, fabric, s, d);
                REQUIRE(got.has_value() == want.has_value());
                if (!got) continue;
                CHECK(got->agg_index == want->agg);
                CHECK(got->core_member == want->core);
                if (trial % 3 != 0) CHECK(want->worst <= caft_oracle(topo, m, s, d).worst);
            }
        }
    }

    TEST_CASE("Optimal examples") {
        const auto topo = FatTree::build(8, 1, 1e9);
        Fabric fabric(topo, FabricParams{});
        auto p = optimal_select(topo, fabric.snapshot(), 0, 127);
        REQUIRE(p.has_value());
        CHECK((p->agg_index == 0 && p->core_member == 0));

        auto* reg = fabric.monitor(topo.agg_up(0, 0, 0));
        reg->set_bytes(bytes_for_load(*reg, 7));
        p = optimal_select(topo, fabric.snapshot(), 0, 127);
        CHECK((p->agg_index == 0 && p->core_member == 1));

        for (int j = 0; j < 4; ++j)
            for (int m = 0; m < 4; ++m) fabric.fail_link(0, j, m);
        CHECK_FALSE(optimal_select(topo, fabric.snapshot(), 0, 127).has_value());
    }

    TEST_CASE("Optimal installs its decision in both source tables") {
        const auto topo = FatTree::build(8, 1, 1e9);
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 200; ++trial) {
            Fabric fabric(topo, FabricParams{});
            const auto m = LoadMap::random(topo, fabric, rng);
            OptimalScheme opt;
            const auto [s, d] = random_pair(topo, rng);
            const auto flow = make_flow(topo, 1, s, d);
            const auto w = walk(opt, fabric, flow);
            CHECK(w.notice(Notice::Kind::syn_delivered).has_value());
            const auto path = opt.data_path(fabric, flow);
            const auto want = brute_force_optimal(topo, m, fabric, s, d);
            CHECK(path->agg_index == want->agg);
            CHECK(path->core_member == want->core);
        }
    }

    // Failure scenario with k = 4: a(0,0)-c(0,0) is cut and flows leave pod 0
    // for pod 1. ToR uplinks toward a(0,0) are lightly loaded, so the
    // destination ToR picks aggregation index 0; the response then climbs
    // from a(1,0) to one of the two cores of group 0.
    void failure_scenario(const FatTree& topo, Fabric& fabric) {
        fabric.fail_link(0, 0, 0);
        auto hot = [&](LinkId l, int load) {
            auto* reg = fabric.monitor(l);
            reg->set_bytes(bytes_for_load(*reg, load));
        };
        for (int t = 0; t < 2; ++t) hot(topo.tor_up(0, t, 1), 5);
        // c(0,1) is the only way in and out of a(0,0)
        hot(topo.agg_up(0, 0, 1), 6);
        for (int p = 1; p < 4; ++p) hot(topo.agg_up(p, 0, 1), 6);
        hot(topo.core_down(0, 1, 0), 6);
    }

    TEST_CASE("Expeditus: a response over the dead core is lost, one over the live core pins a congested path") {
        const auto topo = FatTree::build(4, 1, 1e9);
        int lost = 0, congested = 0;
        for (std::uint64_t id = 0; id < 400; ++id) {
            Fabric fabric(topo, FabricParams{});
            failure_scenario(topo, fabric);
            ExpeditusScheme exp;
            const auto flow = make_flow(topo, id, 0, 4);
            const auto default_path = exp.data_path(fabric, flow);
            const auto w = walk(exp, fabric, flow);
            const bool response_lost = std::any_of(w.drops.begin(), w.drops.end(), [](const Emission& e) {
                return e.msg.kind == MessageKind::exp_response;
            });
            if (response_lost) {
                ++lost;
                CHECK(w.drops.back().link == topo.core_down(0, 0, 0));
                CHECK_FALSE(w.notice(Notice::Kind::path_decided).has_value());
                CHECK(exp.data_path(fabric, flow) == default_path);
            } else if (w.notice(Notice::Kind::path_decided)) {
                const auto p = exp.data_path(fabric, flow);
                CHECK(p->agg_index == 0);
                CHECK(p->core_member == 1);
                CHECK(fabric.hop_entry(topo.agg_up(0, 0, 1)).load == 6);
                ++congested;
            }
        }
        // the response hashes onto either core of group 0
        CHECK(lost > 100);
        CHECK(congested > 100);
    }

    TEST_CASE("CAFT in the same scenario: after learning, the dead core is never used toward pod 0") {
        const auto topo = FatTree::build(4, 1, 1e9);
        Fabric fabric(topo, FabricParams{});
        fabric.fail_link(0, 0, 0);
        CaftScheme caft;
        // A flow out of pod 0 through a(0,0) carries the failure flag to a(p,0).
        for (int p = 1; p < 4; ++p) {
            const auto w = walk(caft, fabric, make_flow(topo, 100 + p, 0, static_cast<HostId>(4 * p)));
            CHECK(w.notice(Notice::Kind::failure_learned).has_value());
            CHECK(fabric.agg_state(p, 0).ft.is_failed(0, 0));
        }
        for (std::uint64_t id = 0; id < 400; ++id) {
            const HostId src = static_cast<HostId>(4 + id % 12);
            const auto flow = make_flow(topo, id, src, 0);
            const auto w = walk(caft, fabric, flow);
            CHECK(w.drops.empty());
            REQUIRE(w.notice(Notice::Kind::path_decided).has_value());
            const auto path = caft.data_path(fabric, flow);
            for (auto l : topo.path_links(*path)) CHECK_FALSE(fabric.link_failed(l));
        }
    }

    TEST_CASE("scheme names") {
        for (auto k : {SchemeKind::caft, SchemeKind::expeditus, SchemeKind::ecmp, SchemeKind::optimal})
            CHECK(scheme_from_string(to_string(k)) == k);
        CHECK_THROWS_AS(scheme_from_string("conga"), ConfigError);
    }
}
