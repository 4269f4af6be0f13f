#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace stabopf {

enum class BusKind { inverter, load };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::load;
    double pd = 0.0;  // p.u.
    double qd = 0.0;  // p.u.
    double vmin = 0.94;
    double vmax = 1.06;
};

// Lossless series branch. `b` is the positive series susceptance 1/x.
// `tap` is a fixed real off-nominal ratio on the from side (1 = none).
struct Branch {
    int from = 0;
    int to = 0;
    double b = 0.0;
    double smax = 0.0;
    double tap = 1.0;
};

// Operating limits and quadratic cost of the inverter at `bus`.
// Cost: a + b*P + c*P^2 + d*Q^2 with P, Q in p.u.
struct GeneratorData {
    int bus = 0;
    double pmin = 0.0;
    double pmax = 0.0;
    double qmin = 0.0;
    double qmax = 0.0;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
};

class CaseError : public std::runtime_error {
  public:
    CaseError(std::size_t line, const std::string& what)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ReductionError : public std::runtime_error {
  public:
    ReductionError(const std::string& what, std::vector<int> buses)
        : std::runtime_error(what), buses_(std::move(buses)) {}
    const std::vector<int>& buses() const noexcept { return buses_; }

  private:
    std::vector<int> buses_;
};

struct Network {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<GeneratorData> generators;
    int ref_bus = 0;
    double base_mva = 100.0;

    std::size_t n_bus() const noexcept { return buses.size(); }
    std::size_t index_of(int bus_id) const;
    std::optional<std::size_t> find(int bus_id) const noexcept;
    std::size_t ref_index() const { return index_of(ref_bus); }
    // Indices (into `buses`) of inverter buses, in file order.
    std::vector<std::size_t> inverter_indices() const;
    // Generator record for an inverter bus, if the case supplied one.
    const GeneratorData* generator_at(int bus_id) const noexcept;
};

// Throws ValidationError on any broken invariant: bounds, duplicate ids,
// self loops, non-positive susceptance or rating, disconnected graph,
// missing reference bus, no inverter bus.
void validate(const Network& net);

// Stable 64-bit digest of all network data. Used to tie derived objects
// (reduced networks, stability sets) back to their source network.
std::uint64_t fingerprint(const Network& net);

struct CaseParseStats {
    std::size_t dropped_bus_shunts = 0;
    std::size_t dropped_line_charging = 0;
};

Network parse_case(std::string_view text, CaseParseStats* stats = nullptr);
Network load_case(const std::filesystem::path& path, CaseParseStats* stats = nullptr);
std::string write_case(const Network& net);

// B = -Im(Y_bus) of the lossless network, scaled entrywise by alpha.
struct SusceptanceMatrix {
    Eigen::MatrixXd B;
    double alpha = 1.0;
    std::uint64_t source_tag = 0;
};

SusceptanceMatrix build_susceptance(const Network& net, double alpha = 1.0);

struct ReducedNetwork {
    Eigen::MatrixXd B;                // over kept buses
    std::vector<int> kept_ids;        // bus ids, file order
    std::vector<std::size_t> kept_index;  // indices into Network::buses
    std::vector<std::vector<std::size_t>> neighbors;  // reduced indices
    std::uint64_t source_tag = 0;

    std::size_t size() const noexcept { return kept_ids.size(); }
};

// Wraps an explicit reduced susceptance matrix (buses labelled 1..n).
// `coupling_tol` decides which off-diagonal entries count as edges.
ReducedNetwork make_reduced(const Eigen::MatrixXd& B, double coupling_tol = 1e-12);

// Kron reduction onto the inverter buses. Constant-power loads become
// shunt admittances (P_D - jQ_D)/V^2 at V = nominal_v before the complex
// Schur complement; the result is -Im(Y_red).
ReducedNetwork kron_reduce(const SusceptanceMatrix& B, const Network& net, double nominal_v = 1.0);

}  // namespace stabopf
