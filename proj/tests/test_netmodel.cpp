#include <random>
#include <string>

#include "doctest.h"
#include "stabopf/netmodel.hpp"

using namespace stabopf;

namespace {

const char* kTwoBus = R"(
[system]
ref_bus = 1
base_mva = 100
[buses]
id kind pd qd vmin vmax
1 inverter 0.45 0.45 0.95 1.05
2 inverter 0.70 0.00 0.95 1.05
[branches]
from to b smax
1 2 10 3
)";

Network chain3(double pd_mid, double qd_mid) {
    Network net;
    net.buses = {{1, BusKind::inverter, 0, 0, 0.9, 1.1}, {2, BusKind::load, pd_mid, qd_mid, 0.9, 1.1}, {3, BusKind::inverter, 0, 0, 0.9, 1.1}};
    net.branches = {{1, 2, 1.0, 5.0}, {2, 3, 1.0, 5.0}};
    net.ref_bus = 1;
    return net;
}

std::string case_path(const char* name) { return std::string(STABOPF_CASE_DIR) + "/" + name; }

}  // namespace

TEST_CASE("two-bus case text parses") {
    const Network net = parse_case(kTwoBus);
    CHECK(net.n_bus() == 2);
    CHECK(net.branches.size() == 1);
    CHECK(net.branches[0].b == 10.0);
    CHECK(net.buses[1].pd == doctest::Approx(0.7));
    CHECK(net.ref_bus == 1);
}

TEST_CASE("parse errors") {
    SUBCASE("no buses") {
        CHECK_THROWS_WITH_AS(parse_case("[system]\nref_bus = 1\n[buses]\nid kind pd qd vmin vmax\n"), "no buses", CaseError);
    }
    SUBCASE("malformed field carries the line number") {
        std::string text = kTwoBus;
        text.replace(text.find("0.70"), 4, "0.7x");
        try {
            parse_case(text);
            FAIL("expected a parse error");
        } catch (const CaseError& e) {
            CHECK(e.line() == 8);
            CHECK(std::string(e.what()).find("line 8") != std::string::npos);
        }
    }
    SUBCASE("nonzero resistance is rejected as lossy") {
        const std::string text = "[system]\nref_bus = 1\n[buses]\nid kind pd qd vmin vmax\n1 inverter 0 0 0.9 1.1\n2 load 0 0 0.9 1.1\n"
                                 "[branches]\nfrom to r x smax\n1 2 0.01 0.1 1\n";
        CHECK_THROWS_WITH_AS(parse_case(text), doctest::Contains("lossless"), CaseError);
    }
    SUBCASE("unknown section") { CHECK_THROWS_AS(parse_case("[nodes]\n"), CaseError); }
    SUBCASE("disconnected network") {
        const std::string text = "[system]\nref_bus = 1\n[buses]\nid kind pd qd vmin vmax\n1 inverter 0 0 0.9 1.1\n2 load 0 0 0.9 1.1\n"
                                 "3 load 0 0 0.9 1.1\n[branches]\nfrom to b smax\n1 2 1 1\n";
        CHECK_THROWS_WITH_AS(parse_case(text), doctest::Contains("not connected"), CaseError);
    }
    SUBCASE("duplicate bus") {
        const std::string text = "[system]\nref_bus = 1\n[buses]\nid kind pd qd vmin vmax\n1 inverter 0 0 0.9 1.1\n1 load 0 0 0.9 1.1\n";
        CHECK_THROWS_WITH_AS(parse_case(text), doctest::Contains("duplicate"), CaseError);
    }
    SUBCASE("vmin above vmax") {
        const std::string text = "[system]\nref_bus = 1\n[buses]\nid kind pd qd vmin vmax\n1 inverter 0 0 1.2 1.1\n";
        CHECK_THROWS_AS(parse_case(text), CaseError);
    }
}

TEST_CASE("shipped fixtures") {
    const Network n39 = load_case(case_path("ieee39_lossless.case"));
    CHECK(n39.n_bus() == 39);
    CHECK(n39.inverter_indices().size() == 10);
    CHECK(n39.ref_bus == 31);
    CHECK(n39.branches.size() == 46);
    CHECK(n39.generators.size() == 10);
    for (const char* f : {"two_bus_zero_price.case", "two_bus_reactive_cost.case", "two_bus_unit.case"}) {
        const Network n2 = load_case(case_path(f));
        CHECK(n2.n_bus() == 2);
        CHECK(n2.inverter_indices().size() == 2);
    }
}

TEST_CASE("write_case round trip preserves the fingerprint") {
    const Network n39 = load_case(case_path("ieee39_lossless.case"));
    const Network again = parse_case(write_case(n39));
    CHECK(fingerprint(again) == fingerprint(n39));
}

TEST_CASE("susceptance assembly") {
    const Network net = parse_case(kTwoBus);
    const SusceptanceMatrix B = build_susceptance(net);
    CHECK(B.B(0, 1) == -10.0);
    CHECK(B.B(1, 0) == -10.0);
    CHECK(B.B(0, 0) == 10.0);
    CHECK(B.B(1, 1) == 10.0);

    const SusceptanceMatrix B2 = build_susceptance(net, 2.0);
    CHECK((B2.B - 2.0 * B.B).cwiseAbs().maxCoeff() == 0.0);

    // Unit-susceptance path 1-2-3 assembled by hand.
    Eigen::Matrix3d expect;
    expect << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    const SusceptanceMatrix B3 = build_susceptance(chain3(0, 0));
    CHECK((B3.B - expect).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(build_susceptance(net, 0.0), std::invalid_argument);
}

TEST_CASE("susceptance symmetry and sparsity on the 39-bus case") {
    const Network n39 = load_case(case_path("ieee39_lossless.case"));
    const SusceptanceMatrix B = build_susceptance(n39);
    CHECK((B.B - B.B.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::MatrixXi edge = Eigen::MatrixXi::Zero(39, 39);
    for (const auto& br : n39.branches) {
        edge(static_cast<Eigen::Index>(n39.index_of(br.from)), static_cast<Eigen::Index>(n39.index_of(br.to))) = 1;
        edge(static_cast<Eigen::Index>(n39.index_of(br.to)), static_cast<Eigen::Index>(n39.index_of(br.from))) = 1;
    }
    for (Eigen::Index i = 0; i < 39; ++i) {
        CHECK(B.B(i, i) != 0.0);
        for (Eigen::Index j = 0; j < 39; ++j) {
            if (i != j) CHECK((B.B(i, j) != 0.0) == (edge(i, j) == 1));
        }
    }
}

TEST_CASE("Kron reduction") {
    SUBCASE("no eliminated buses is the identity") {
        const Network net = parse_case(kTwoBus);
        const SusceptanceMatrix B = build_susceptance(net);
        Network noload = net;
        for (auto& b : noload.buses) b.pd = b.qd = 0.0;
        const ReducedNetwork red = kron_reduce(build_susceptance(noload), noload);
        CHECK((red.B - B.B).cwiseAbs().maxCoeff() == 0.0);
        CHECK(red.kept_ids == std::vector<int>{1, 2});
    }
    SUBCASE("series combination through a load bus") {
        const Network net = chain3(0, 0);
        const ReducedNetwork red = kron_reduce(build_susceptance(net), net);
        REQUIRE(red.size() == 2);
        CHECK(red.B(0, 1) == doctest::Approx(-0.5).epsilon(1e-14));
        CHECK(red.B(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(red.kept_ids == std::vector<int>{1, 3});
    }
    SUBCASE("reactive load enters the eliminated diagonal") {
        // Y_ee = -j*2 + (0 - j*0.5) so B_ee = 2.5 after the load shunt.
        const Network net = chain3(0.0, 0.5);
        const ReducedNetwork red = kron_reduce(build_susceptance(net), net);
        CHECK(red.B(0, 1) == doctest::Approx(-1.0 / 2.5).epsilon(1e-13));
        CHECK(red.B(0, 0) == doctest::Approx(1.0 - 1.0 / 2.5).epsilon(1e-13));
    }
    SUBCASE("singular elimination block names the bus") {
        // The load shunt cancels the line: Y_ee = -j*2 + j*2 = 0.
        const Network net = chain3(0.0, -2.0);
        try {
            kron_reduce(build_susceptance(net), net);
            FAIL("expected a reduction error");
        } catch (const ReductionError& e) {
            CHECK(e.buses() == std::vector<int>{2});
        }
    }
    SUBCASE("39-bus reduction is dense and symmetric") {
        const Network n39 = load_case(case_path("ieee39_lossless.case"));
        const ReducedNetwork red = kron_reduce(build_susceptance(n39), n39);
        REQUIRE(red.size() == 10);
        CHECK((red.B - red.B.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        for (Eigen::Index i = 0; i < 10; ++i) {
            CHECK(red.neighbors[static_cast<std::size_t>(i)].size() == 9);
            for (Eigen::Index j = 0; j < 10; ++j) CHECK(red.B(i, j) != 0.0);
        }
    }
}

TEST_CASE("Kron reduction commutes with scaling for zero loads") {
    Network n39 = load_case(case_path("ieee39_lossless.case"));
    for (auto& b : n39.buses) b.pd = b.qd = 0.0;
    const ReducedNetwork r1 = kron_reduce(build_susceptance(n39, 1.0), n39);
    for (double alpha : {0.5, 1.3, 2.0}) {
        const ReducedNetwork ra = kron_reduce(build_susceptance(n39, alpha), n39);
        const double rel = (ra.B - alpha * r1.B).cwiseAbs().maxCoeff() / (alpha * r1.B).cwiseAbs().maxCoeff();
        CHECK(rel <= 1e-10);
    }
}

TEST_CASE("Kron reduction matches a real Schur complement on random lossless networks") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ub(0.5, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        Network net;
        const int n = 6;
        for (int i = 1; i <= n; ++i) net.buses.push_back({i, i <= 3 ? BusKind::inverter : BusKind::load, 0, 0, 0.9, 1.1});
        for (int i = 2; i <= n; ++i) net.branches.push_back({static_cast<int>(rng() % static_cast<unsigned>(i - 1)) + 1, i, ub(rng), 5.0});
        net.branches.push_back({1, n, ub(rng), 5.0});
        net.ref_bus = 1;
        const SusceptanceMatrix B = build_susceptance(net);
        const ReducedNetwork red = kron_reduce(B, net);
        const Eigen::MatrixXd Bkk = B.B.topLeftCorner(3, 3);
        const Eigen::MatrixXd Bke = B.B.topRightCorner(3, 3);
        const Eigen::MatrixXd Bee = B.B.bottomRightCorner(3, 3);
        const Eigen::MatrixXd expect = Bkk - Bke * Bee.inverse() * Bke.transpose();
        CHECK((red.B - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
    }
}
