#include "stabopf/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

namespace stabopf {

std::optional<std::size_t> Network::find(int bus_id) const noexcept {
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (buses[k].id == bus_id) return k;
    }
    return std::nullopt;
}

std::size_t Network::index_of(int bus_id) const {
    if (auto k = find(bus_id)) return *k;
    throw ValidationError("unknown bus id " + std::to_string(bus_id));
}

std::vector<std::size_t> Network::inverter_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (buses[k].kind == BusKind::inverter) out.push_back(k);
    }
    return out;
}

const GeneratorData* Network::generator_at(int bus_id) const noexcept {
    for (const auto& g : generators) {
        if (g.bus == bus_id) return &g;
    }
    return nullptr;
}

void validate(const Network& net) {
    if (net.buses.empty()) throw ValidationError("no buses");
    std::set<int> ids;
    for (const auto& bus : net.buses) {
        if (!ids.insert(bus.id).second) {
            throw ValidationError("duplicate bus id " + std::to_string(bus.id));
        }
        if (!(bus.vmin > 0.0)) throw ValidationError("bus " + std::to_string(bus.id) + ": vmin must be positive");
        if (bus.vmin > bus.vmax) throw ValidationError("bus " + std::to_string(bus.id) + ": vmin > vmax");
        if (!std::isfinite(bus.pd) || !std::isfinite(bus.qd)) {
            throw ValidationError("bus " + std::to_string(bus.id) + ": non-finite load");
        }
    }
    if (!ids.count(net.ref_bus)) throw ValidationError("reference bus " + std::to_string(net.ref_bus) + " does not exist");
    if (net.inverter_indices().empty()) throw ValidationError("network has no inverter bus");

    const std::size_t n = net.n_bus();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto root = [&](std::size_t k) {
        while (parent[k] != k) k = parent[k] = parent[parent[k]];
        return k;
    };
    for (const auto& br : net.branches) {
        if (br.from == br.to) throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + " is a self loop");
        if (!ids.count(br.from) || !ids.count(br.to)) {
            throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + " references an unknown bus");
        }
        if (!(br.b > 0.0)) throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + ": susceptance must be positive");
        if (!(br.smax > 0.0)) throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + ": smax must be positive");
        if (!(br.tap > 0.0)) throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + ": tap must be positive");
        parent[root(net.index_of(br.from))] = root(net.index_of(br.to));
    }
    const std::size_t r0 = root(0);
    for (std::size_t k = 1; k < n; ++k) {
        if (root(k) != r0) throw ValidationError("network is not connected (bus " + std::to_string(net.buses[k].id) + ")");
    }
    for (const auto& g : net.generators) {
        auto k = net.find(g.bus);
        if (!k) throw ValidationError("generator at unknown bus " + std::to_string(g.bus));
        if (net.buses[*k].kind != BusKind::inverter) {
            throw ValidationError("generator at bus " + std::to_string(g.bus) + " which is not an inverter bus");
        }
        if (g.pmin > g.pmax || g.qmin > g.qmax) throw ValidationError("generator at bus " + std::to_string(g.bus) + ": limits out of order");
        if (g.c < 0.0 || g.d < 0.0) throw ValidationError("generator at bus " + std::to_string(g.bus) + ": quadratic costs must be non-negative");
    }
}

namespace {

struct Fnv1a {
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void* p, std::size_t len) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t k = 0; k < len; ++k) {
            h ^= c[k];
            h *= 1099511628211ull;
        }
    }
    void num(double v) { bytes(&v, sizeof v); }
    void num(int v) { bytes(&v, sizeof v); }
};

}  // namespace

std::uint64_t fingerprint(const Network& net) {
    Fnv1a f;
    for (const auto& b : net.buses) {
        f.num(b.id);
        f.num(static_cast<int>(b.kind));
        f.num(b.pd);
        f.num(b.qd);
        f.num(b.vmin);
        f.num(b.vmax);
    }
    for (const auto& br : net.branches) {
        f.num(br.from);
        f.num(br.to);
        f.num(br.b);
        f.num(br.smax);
        f.num(br.tap);
    }
    for (const auto& g : net.generators) {
        for (double v : {g.pmin, g.pmax, g.qmin, g.qmax, g.a, g.b, g.c, g.d}) f.num(v);
        f.num(g.bus);
    }
    f.num(net.ref_bus);
    f.num(net.base_mva);
    return f.h;
}

SusceptanceMatrix build_susceptance(const Network& net, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("susceptance scaling alpha must be positive");
    const auto n = static_cast<Eigen::Index>(net.n_bus());
    SusceptanceMatrix out;
    out.B = Eigen::MatrixXd::Zero(n, n);
    out.alpha = alpha;
    out.source_tag = fingerprint(net);
    for (const auto& br : net.branches) {
        const auto i = static_cast<Eigen::Index>(net.index_of(br.from));
        const auto j = static_cast<Eigen::Index>(net.index_of(br.to));
        const double y = alpha * br.b;
        out.B(i, i) += y / (br.tap * br.tap);
        out.B(j, j) += y;
        out.B(i, j) -= y / br.tap;
        out.B(j, i) -= y / br.tap;
    }
    return out;
}

namespace {

std::vector<std::vector<std::size_t>> adjacency(const Eigen::MatrixXd& B, double tol) {
    const auto n = static_cast<std::size_t>(B.rows());
    const double scale = std::max(1.0, B.cwiseAbs().maxCoeff());
    std::vector<std::vector<std::size_t>> nb(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && std::abs(B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) > tol * scale) {
                nb[i].push_back(j);
            }
        }
    }
    return nb;
}

}  // namespace

ReducedNetwork make_reduced(const Eigen::MatrixXd& B, double coupling_tol) {
    if (B.rows() != B.cols()) throw std::invalid_argument("reduced susceptance must be square");
    ReducedNetwork red;
    red.B = B;
    for (Eigen::Index k = 0; k < B.rows(); ++k) {
        red.kept_ids.push_back(static_cast<int>(k) + 1);
        red.kept_index.push_back(static_cast<std::size_t>(k));
    }
    red.neighbors = adjacency(B, coupling_tol);
    return red;
}

ReducedNetwork kron_reduce(const SusceptanceMatrix& sus, const Network& net, double nominal_v) {
    if (!(nominal_v > 0.0)) throw std::invalid_argument("nominal voltage must be positive");
    using Complex = std::complex<double>;
    const auto n = static_cast<Eigen::Index>(net.n_bus());
    if (sus.B.rows() != n) throw std::invalid_argument("susceptance matrix does not match network size");

    Eigen::MatrixXcd Y = Complex(0.0, -1.0) * sus.B.cast<Complex>();
    const double v2 = nominal_v * nominal_v;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& bus = net.buses[static_cast<std::size_t>(k)];
        Y(k, k) += Complex(bus.pd / v2, -bus.qd / v2);
    }

    std::vector<Eigen::Index> keep;
    std::vector<Eigen::Index> elim;
    for (Eigen::Index k = 0; k < n; ++k) {
        (net.buses[static_cast<std::size_t>(k)].kind == BusKind::inverter ? keep : elim).push_back(k);
    }
    const auto nk = static_cast<Eigen::Index>(keep.size());
    const auto ne = static_cast<Eigen::Index>(elim.size());

    Eigen::MatrixXcd Ykk(nk, nk);
    for (Eigen::Index a = 0; a < nk; ++a)
        for (Eigen::Index b = 0; b < nk; ++b) Ykk(a, b) = Y(keep[a], keep[b]);

    if (ne > 0) {
        Eigen::MatrixXcd Yee(ne, ne), Yek(ne, nk);
        for (Eigen::Index a = 0; a < ne; ++a) {
            for (Eigen::Index b = 0; b < ne; ++b) Yee(a, b) = Y(elim[a], elim[b]);
            for (Eigen::Index b = 0; b < nk; ++b) Yek(a, b) = Y(elim[a], keep[b]);
        }
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(Yee);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) {
            // Name the eliminated buses that sit in the dependent part of the block.
            std::vector<int> offending;
            const Eigen::MatrixXcd kernel = lu.kernel();
            for (Eigen::Index a = 0; a < ne; ++a) {
                if (kernel.row(a).cwiseAbs().maxCoeff() > 1e-9) {
                    offending.push_back(net.buses[static_cast<std::size_t>(elim[a])].id);
                }
            }
            std::ostringstream msg;
            msg << "singular elimination block in Kron reduction; buses:";
            for (int id : offending) msg << ' ' << id;
            throw ReductionError(msg.str(), offending);
        }
        Ykk -= Yek.transpose() * lu.solve(Yek);
    }

    ReducedNetwork red;
    red.B = -Ykk.imag();
    red.B = 0.5 * (red.B + red.B.transpose()).eval();
    for (auto k : keep) {
        red.kept_index.push_back(static_cast<std::size_t>(k));
        red.kept_ids.push_back(net.buses[static_cast<std::size_t>(k)].id);
    }
    red.neighbors = adjacency(red.B, 1e-12);
    red.source_tag = fingerprint(net);
    return red;
}

}  // namespace stabopf
