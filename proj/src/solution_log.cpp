#include "stabopf/solution_log.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace stabopf {

namespace {

using nlohmann::json;

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(number(v(k)));
    return a;
}

double read_number(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

Eigen::VectorXd read_vec(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = read_number(j[k]);
    return v;
}

OpfStatus parse_status(const std::string& s) {
    for (OpfStatus st : {OpfStatus::optimal, OpfStatus::infeasible, OpfStatus::max_iter, OpfStatus::degenerate})
        if (to_string(st) == s) return st;
    throw std::invalid_argument("unknown status: " + s);
}

}  // namespace

std::string to_json_line(const SolutionRecord& rec, const OpfProblem& prob) {
    const OpfSolution& s = rec.solution;
    json j;
    j["experiment"] = rec.experiment;
    j["point"] = rec.point;
    json params = json::object();
    for (const auto& [k, v] : rec.params) params[k] = number(v);
    j["params"] = params;
    j["status"] = to_string(s.status);
    j["objective"] = number(s.objective);
    j["kkt_residual"] = number(s.kkt_residual);
    j["stationarity_abs"] = number(s.stationarity_abs);
    j["feasibility"] = number(s.feasibility);
    j["complementarity"] = number(s.complementarity);
    j["acceptable_only"] = s.acceptable_only;
    j["best_start"] = s.best_start;
    std::vector<int> gen_bus;
    for (std::size_t b : prob.gen_bus) gen_bus.push_back(prob.net.buses[b].id);
    j["gen_bus"] = gen_bus;
    std::vector<int> bus;
    for (const auto& b : prob.net.buses) bus.push_back(b.id);
    j["bus"] = bus;
    j["x"] = {{"pg", vec(s.x.pg)}, {"qg", vec(s.x.qg)}, {"v", vec(s.x.v)}, {"theta", vec(s.x.theta)}};
    j["lambda_p"] = vec(s.lambda_p);
    j["lambda_q"] = vec(s.lambda_q);
    j["nu"] = vec(s.nu);
    j["mu_stab"] = vec(s.mu_stab);
    j["q_values"] = vec(s.q_values);
    j["h_values"] = vec(s.h_values);
    json active = json::array();
    for (std::size_t k : s.active_set) active.push_back(describe(prob.ineq[k], prob.net));
    j["active"] = active;
    j["active_index"] = s.active_set;
    json starts = json::array();
    for (const auto& d : s.starts)
        starts.push_back({{"start", d.start},
                          {"objective", number(d.objective)},
                          {"kkt_residual", number(d.kkt_residual)},
                          {"iterations", d.iterations},
                          {"message", d.message}});
    j["starts"] = starts;
    return j.dump();
}

SolutionRecord parse_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed solution record: ") + e.what());
    }
    try {
        SolutionRecord rec;
        rec.experiment = j.at("experiment").get<std::string>();
        rec.point = j.at("point").get<std::size_t>();
        for (const auto& [k, v] : j.at("params").items()) rec.params[k] = read_number(v);
        OpfSolution& s = rec.solution;
        s.status = parse_status(j.at("status").get<std::string>());
        s.objective = read_number(j.at("objective"));
        s.kkt_residual = read_number(j.at("kkt_residual"));
        s.stationarity_abs = read_number(j.at("stationarity_abs"));
        s.feasibility = read_number(j.at("feasibility"));
        s.complementarity = read_number(j.at("complementarity"));
        s.acceptable_only = j.at("acceptable_only").get<bool>();
        s.best_start = j.at("best_start").get<std::size_t>();
        const json& x = j.at("x");
        s.x.pg = read_vec(x.at("pg"));
        s.x.qg = read_vec(x.at("qg"));
        s.x.v = read_vec(x.at("v"));
        s.x.theta = read_vec(x.at("theta"));
        s.lambda_p = read_vec(j.at("lambda_p"));
        s.lambda_q = read_vec(j.at("lambda_q"));
        s.nu = read_vec(j.at("nu"));
        s.mu_stab = read_vec(j.at("mu_stab"));
        s.q_values = read_vec(j.at("q_values"));
        s.h_values = read_vec(j.at("h_values"));
        s.active_set = j.at("active_index").get<std::vector<std::size_t>>();
        return rec;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed solution record: ") + e.what());
    }
}

SolutionLog::SolutionLog(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
}

void SolutionLog::append(const SolutionRecord& rec, const OpfProblem& prob) { append_raw(to_json_line(rec, prob)); }

void SolutionLog::append_raw(const std::string& json_object) {
    out_ << json_object << '\n';
    out_.flush();
}

}  // namespace stabopf
