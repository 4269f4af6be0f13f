#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "stabopf/netmodel.hpp"

namespace stabopf {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t k = 0;
    while (k < s.size()) {
        while (k < s.size() && (std::isspace(static_cast<unsigned char>(s[k])) || s[k] == ',')) ++k;
        const std::size_t start = k;
        while (k < s.size() && !std::isspace(static_cast<unsigned char>(s[k])) && s[k] != ',') ++k;
        if (k > start) out.push_back(s.substr(start, k - start));
    }
    return out;
}

double to_double(std::string_view tok, std::size_t line, std::string_view field) {
    double v = 0.0;
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw CaseError(line, "malformed number '" + std::string(tok) + "' in field '" + std::string(field) + "'");
    }
    return v;
}

int to_int(std::string_view tok, std::size_t line, std::string_view field) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw CaseError(line, "malformed integer '" + std::string(tok) + "' in field '" + std::string(field) + "'");
    }
    return v;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Column header of one record table.
class Columns {
  public:
    Columns(const std::vector<std::string_view>& names, std::size_t line) : line_(line) {
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (!index_.emplace(lower(names[k]), k).second) {
                throw CaseError(line, "duplicate column '" + std::string(names[k]) + "'");
            }
        }
    }
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    void require(std::initializer_list<const char*> names) const {
        for (const char* n : names) {
            if (!has(n)) throw CaseError(line_, std::string("missing required column '") + n + "'");
        }
    }
    std::size_t size() const { return index_.size(); }
    std::string_view get(const std::vector<std::string_view>& row, const std::string& name) const {
        return row[index_.at(name)];
    }

  private:
    std::map<std::string, std::size_t> index_;
    std::size_t line_;
};

enum class Section { none, system, buses, branches, generators };

}  // namespace

Network parse_case(std::string_view text, CaseParseStats* stats) {
    Network net;
    CaseParseStats local;
    Section section = Section::none;
    std::optional<Columns> cols;
    bool have_ref = false;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw CaseError(line_no, "unterminated section header");
            const std::string name = lower(trim(line.substr(1, line.size() - 2)));
            cols.reset();
            if (name == "system") section = Section::system;
            else if (name == "buses") section = Section::buses;
            else if (name == "branches") section = Section::branches;
            else if (name == "generators") section = Section::generators;
            else throw CaseError(line_no, "unknown section [" + name + "]");
            continue;
        }

        switch (section) {
            case Section::none:
                throw CaseError(line_no, "content before the first section header");
            case Section::system: {
                const auto eq = line.find('=');
                if (eq == std::string_view::npos) throw CaseError(line_no, "expected key = value");
                const std::string key = lower(trim(line.substr(0, eq)));
                const std::string_view val = trim(line.substr(eq + 1));
                if (key == "ref_bus") {
                    net.ref_bus = to_int(val, line_no, key);
                    have_ref = true;
                } else if (key == "base_mva") {
                    net.base_mva = to_double(val, line_no, key);
                    if (net.base_mva != 100.0) throw CaseError(line_no, "only base_mva = 100 is supported");
                } else if (key == "name") {
                    // informational
                } else {
                    throw CaseError(line_no, "unknown system key '" + key + "'");
                }
                break;
            }
            case Section::buses:
            case Section::branches:
            case Section::generators: {
                const auto toks = split_ws(line);
                if (!cols) {
                    cols.emplace(toks, line_no);
                    if (section == Section::buses) cols->require({"id", "kind", "pd", "qd", "vmin", "vmax"});
                    if (section == Section::branches) {
                        cols->require({"from", "to", "smax"});
                        if (cols->has("b") == cols->has("x")) throw CaseError(line_no, "branches need exactly one of the columns 'b' or 'x'");
                    }
                    if (section == Section::generators) cols->require({"bus", "pmin", "pmax", "qmin", "qmax"});
                    break;
                }
                if (toks.size() != cols->size()) {
                    throw CaseError(line_no, "expected " + std::to_string(cols->size()) + " fields, found " + std::to_string(toks.size()));
                }
                if (section == Section::buses) {
                    Bus bus;
                    bus.id = to_int(cols->get(toks, "id"), line_no, "id");
                    const std::string kind = lower(cols->get(toks, "kind"));
                    if (kind == "inverter") bus.kind = BusKind::inverter;
                    else if (kind == "load") bus.kind = BusKind::load;
                    else throw CaseError(line_no, "bus kind must be 'inverter' or 'load', got '" + kind + "'");
                    bus.pd = to_double(cols->get(toks, "pd"), line_no, "pd");
                    bus.qd = to_double(cols->get(toks, "qd"), line_no, "qd");
                    bus.vmin = to_double(cols->get(toks, "vmin"), line_no, "vmin");
                    bus.vmax = to_double(cols->get(toks, "vmax"), line_no, "vmax");
                    for (const char* shunt : {"gs", "bs"}) {
                        if (cols->has(shunt) && to_double(cols->get(toks, shunt), line_no, shunt) != 0.0) ++local.dropped_bus_shunts;
                    }
                    net.buses.push_back(bus);
                } else if (section == Section::branches) {
                    Branch br;
                    br.from = to_int(cols->get(toks, "from"), line_no, "from");
                    br.to = to_int(cols->get(toks, "to"), line_no, "to");
                    if (cols->has("r")) {
                        const double r = to_double(cols->get(toks, "r"), line_no, "r");
                        if (r != 0.0) {
                            throw CaseError(line_no, "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                                         " has nonzero resistance; the network must be lossless (G = 0)");
                        }
                    }
                    if (cols->has("x")) {
                        const double x = to_double(cols->get(toks, "x"), line_no, "x");
                        if (!(x > 0.0)) throw CaseError(line_no, "branch reactance must be positive");
                        br.b = 1.0 / x;
                    } else {
                        br.b = to_double(cols->get(toks, "b"), line_no, "b");
                    }
                    br.smax = to_double(cols->get(toks, "smax"), line_no, "smax");
                    if (cols->has("tap")) {
                        br.tap = to_double(cols->get(toks, "tap"), line_no, "tap");
                        if (br.tap == 0.0) br.tap = 1.0;
                    }
                    if (cols->has("charging") && to_double(cols->get(toks, "charging"), line_no, "charging") != 0.0) {
                        ++local.dropped_line_charging;
                    }
                    net.branches.push_back(br);
                } else {
                    GeneratorData g;
                    g.bus = to_int(cols->get(toks, "bus"), line_no, "bus");
                    g.pmin = to_double(cols->get(toks, "pmin"), line_no, "pmin");
                    g.pmax = to_double(cols->get(toks, "pmax"), line_no, "pmax");
                    g.qmin = to_double(cols->get(toks, "qmin"), line_no, "qmin");
                    g.qmax = to_double(cols->get(toks, "qmax"), line_no, "qmax");
                    auto opt = [&](const char* name) { return cols->has(name) ? to_double(cols->get(toks, name), line_no, name) : 0.0; };
                    g.a = opt("a");
                    g.b = opt("b");
                    g.c = opt("c");
                    g.d = opt("d");
                    net.generators.push_back(g);
                }
                break;
            }
        }
    }

    if (net.buses.empty()) throw CaseError(0, "no buses");
    if (!have_ref) throw CaseError(0, "missing [system] ref_bus");
    try {
        validate(net);
    } catch (const ValidationError& e) {
        throw CaseError(0, e.what());
    }
    if (stats) *stats = local;
    return net;
}

Network load_case(const std::filesystem::path& path, CaseParseStats* stats) {
    std::ifstream in(path);
    if (!in) throw CaseError(0, "cannot open case file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str(), stats);
}

std::string write_case(const Network& net) {
    std::ostringstream out;
    out.precision(17);
    out << "[system]\nref_bus = " << net.ref_bus << "\nbase_mva = " << net.base_mva << "\n\n[buses]\nid kind pd qd vmin vmax\n";
    for (const auto& b : net.buses) {
        out << b.id << ' ' << (b.kind == BusKind::inverter ? "inverter" : "load") << ' ' << b.pd << ' ' << b.qd << ' ' << b.vmin << ' '
            << b.vmax << '\n';
    }
    out << "\n[branches]\nfrom to b smax tap\n";
    for (const auto& br : net.branches) out << br.from << ' ' << br.to << ' ' << br.b << ' ' << br.smax << ' ' << br.tap << '\n';
    if (!net.generators.empty()) {
        out << "\n[generators]\nbus pmin pmax qmin qmax a b c d\n";
        for (const auto& g : net.generators) {
            out << g.bus << ' ' << g.pmin << ' ' << g.pmax << ' ' << g.qmin << ' ' << g.qmax << ' ' << g.a << ' ' << g.b << ' ' << g.c << ' '
                << g.d << '\n';
        }
    }
    return out.str();
}

}  // namespace stabopf
