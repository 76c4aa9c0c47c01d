#include "tsvar/problem_file.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tsvar {

namespace {

struct RawValue {
    std::string text; // unquoted scalar or raw remainder
    std::vector<std::string> list;
    bool is_list = false;
    int line = 0;
};

struct RawFile {
    // section -> key -> value; insertion order preserved for diagnostics
    std::map<std::string, std::map<std::string, RawValue>> sections;
    std::string origin;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw input_error(origin + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s, const std::string& origin, int line) {
    std::string t = trim(s);
    if (t.size() >= 2 && t.front() == '"') {
        if (t.back() != '"') fail(origin, line, "unterminated quoted value");
        return t.substr(1, t.size() - 2);
    }
    return t;
}

std::vector<std::string> split_list(const std::string& s, const std::string& origin, int line) {
    // inside [ ... ]: comma-separated entries, possibly quoted
    std::vector<std::string> out;
    std::string cur;
    bool in_quote = false;
    for (char c : s) {
        if (c == '"') {
            in_quote = !in_quote;
            continue;
        }
        if (c == ',' && !in_quote) {
            std::string item = trim(cur);
            if (!item.empty()) out.push_back(item);
            cur.clear();
            continue;
        }
        cur += c;
    }
    if (in_quote) fail(origin, line, "unterminated quote in list");
    std::string item = trim(cur);
    if (!item.empty()) out.push_back(item);
    return out;
}

RawFile parse_raw(const std::string& text, const std::string& origin) {
    RawFile rf;
    rf.origin = origin;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int ln = 0;
    while (std::getline(is, line)) {
        ++ln;
        // strip comments outside quotes
        std::string stripped;
        bool in_quote = false;
        for (char c : line) {
            if (c == '"') in_quote = !in_quote;
            if ((c == '#' || c == ';') && !in_quote) break;
            stripped += c;
        }
        stripped = trim(stripped);
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']') fail(origin, ln, "malformed section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) fail(origin, ln, "empty section name");
            rf.sections[section]; // create
            continue;
        }
        size_t eq = stripped.find('=');
        if (eq == std::string::npos) fail(origin, ln, "expected key = value");
        std::string key = trim(stripped.substr(0, eq));
        std::string val = trim(stripped.substr(eq + 1));
        if (key.empty()) fail(origin, ln, "empty key");
        if (section.empty()) fail(origin, ln, "key outside any section");
        RawValue rv;
        rv.line = ln;
        if (!val.empty() && val.front() == '[') {
            if (val.back() != ']') fail(origin, ln, "unterminated list");
            rv.is_list = true;
            rv.list = split_list(val.substr(1, val.size() - 2), origin, ln);
            for (auto& item : rv.list) item = unquote(item, origin, ln);
        } else {
            rv.text = unquote(val, origin, ln);
        }
        auto& sec = rf.sections[section];
        if (sec.count(key)) fail(origin, ln, "duplicate key '" + section + "." + key + "'");
        sec[key] = std::move(rv);
    }
    return rf;
}

class SectionReader {
  public:
    SectionReader(const RawFile& rf, const std::string& name)
        : rf_(rf), name_(name), kv_(rf.sections.at(name)) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    const RawValue& get(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end())
            throw input_error(rf_.origin + ": missing required key '" + name_ + "." + key + "'");
        used_.insert(key);
        return it->second;
    }

    std::optional<std::string> opt_string(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return get(key).text;
    }

    double number(const std::string& key) {
        const RawValue& rv = get(key);
        try {
            size_t pos = 0;
            double v = std::stod(rv.text, &pos);
            if (pos != rv.text.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail(rf_.origin, rv.line, "key '" + name_ + "." + key + "' is not a number: '" +
                                          rv.text + "'");
        }
    }

    std::optional<double> opt_number(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return number(key);
    }

    std::vector<std::string> list(const std::string& key) {
        const RawValue& rv = get(key);
        if (!rv.is_list) fail(rf_.origin, rv.line, "key '" + name_ + "." + key + "' must be a list");
        return rv.list;
    }

    void finish() const {
        for (const auto& [key, rv] : kv_)
            if (!used_.count(key))
                fail(rf_.origin, rv.line, "unknown key '" + name_ + "." + key + "'");
    }

    const std::string& origin() const { return rf_.origin; }
    int line_of(const std::string& key) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? 0 : it->second.line;
    }

  private:
    const RawFile& rf_;
    std::string name_;
    const std::map<std::string, RawValue>& kv_;
    std::set<std::string> used_;
};

Expression parse_expr_key(SectionReader& sec, const std::string& key,
                          std::vector<std::string> vars) {
    const RawValue& rv = sec.get(key);
    try {
        return Expression::parse(rv.text, std::move(vars));
    } catch (const parse_error& e) {
        throw input_error(sec.origin() + ":" + std::to_string(rv.line) + ": in '" + key +
                          "': " + e.what());
    }
}

std::vector<Expression> parse_expr_list(SectionReader& sec, const std::string& key,
                                        std::vector<std::string> vars) {
    std::vector<Expression> out;
    for (const std::string& item : sec.list(key)) {
        try {
            out.push_back(Expression::parse(item, vars));
        } catch (const parse_error& e) {
            throw input_error(sec.origin() + ":" + std::to_string(sec.line_of(key)) + ": in '" +
                              key + "' entry '" + item + "': " + e.what());
        }
    }
    return out;
}

// candidate trajectory: either an expression in t or points(v0, v1, ...)
GridFunction parse_trajectory(const std::string& text, const TimeScalePtr& scale,
                              const std::string& origin, int line) {
    std::string t = trim(text);
    if (t.rfind("points", 0) == 0) {
        size_t open = t.find('(');
        size_t close = t.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close < open)
            fail(origin, line, "malformed points(...) trajectory");
        std::vector<std::string> parts = split_list(t.substr(open + 1, close - open - 1), origin, line);
        std::vector<double> vals;
        for (auto& pstr : parts) {
            try {
                vals.push_back(std::stod(pstr));
            } catch (const std::exception&) {
                fail(origin, line, "bad number '" + pstr + "' in trajectory");
            }
        }
        if (static_cast<int>(vals.size()) != scale->size())
            fail(origin, line,
                 "trajectory has " + std::to_string(vals.size()) + " values but the scale has " +
                     std::to_string(scale->size()) + " points");
        return GridFunction(scale, std::move(vals));
    }
    Expression e = Expression::parse(t, {"t"});
    return GridFunction::sample(scale, [&](double tt) {
        std::array<double, 1> x{tt};
        return e.eval(x);
    });
}

TimeScalePtr scale_key(SectionReader& sec) {
    const RawValue& rv = sec.get("scale");
    try {
        return build_timescale(rv.text);
    } catch (const input_error& e) {
        throw input_error(sec.origin() + ":" + std::to_string(rv.line) + ": " + e.what());
    }
}

} // namespace

TimeScalePtr ProblemFile::scale() const {
    switch (kind) {
        case Kind::variational: return variational->scale;
        case Kind::composition: return composition->scale;
        case Kind::synthesis: return synthesis->scale;
        case Kind::helmholtz: return helmholtz->scale;
    }
    throw input_error("problem file has no scale");
}

ProblemFile parse_problem_text(const std::string& text, const std::string& origin) {
    RawFile rf = parse_raw(text, origin);

    const char* primaries[] = {"variational", "composition", "synthesis", "helmholtz"};
    std::vector<std::string> present;
    for (const char* p : primaries)
        if (rf.sections.count(p)) present.push_back(p);
    if (present.empty())
        throw input_error(origin + ": no primary section found (expected one of "
                                   "[variational], [composition], [synthesis], [helmholtz])");
    if (present.size() > 1)
        throw input_error(origin + ": exactly one primary section allowed, found [" + present[0] +
                          "] and [" + present[1] + "]");

    for (const auto& [name, _] : rf.sections) {
        if (name == "output" || name == "composition.iso") continue;
        if (name != present[0])
            throw input_error(origin + ": unknown section [" + name + "]");
    }
    if (rf.sections.count("composition.iso") && present[0] != std::string("composition"))
        throw input_error(origin + ": [composition.iso] requires a [composition] section");

    ProblemFile pf;
    std::optional<std::string> cand_text;
    int cand_line = 0;

    if (present[0] == std::string("variational")) {
        pf.kind = ProblemFile::Kind::variational;
        SectionReader sec(rf, "variational");
        VariationalProblem vp;
        vp.scale = scale_key(sec);
        vp.lagrangian = std::make_shared<ExprLagrangian>(
            parse_expr_key(sec, "lagrangian", {"t", "y", "v"}));
        std::string fl = sec.get("flavor").text;
        if (fl == "delta")
            vp.flavor = Flavor::delta;
        else if (fl == "nabla")
            vp.flavor = Flavor::nabla;
        else
            throw input_error(origin + ": variational.flavor must be delta or nabla, got '" + fl +
                              "'");
        vp.y_a = sec.opt_number("y_a");
        vp.y_b = sec.opt_number("y_b");
        if (sec.has("y")) {
            cand_text = sec.get("y").text;
            cand_line = sec.line_of("y");
        }
        sec.finish();
        vp.validate();
        pf.variational = std::move(vp);
    } else if (present[0] == std::string("composition")) {
        pf.kind = ProblemFile::Kind::composition;
        SectionReader sec(rf, "composition");
        CompositionProblem cp;
        cp.scale = scale_key(sec);
        cp.delta_f = sec.has("delta_f") ? parse_expr_list(sec, "delta_f", {"t", "y", "v"})
                                        : std::vector<Expression>{};
        cp.nabla_f = sec.has("nabla_f") ? parse_expr_list(sec, "nabla_f", {"t", "y", "v"})
                                        : std::vector<Expression>{};
        int m = static_cast<int>(cp.delta_f.size() + cp.nabla_f.size());
        std::vector<std::string> fvars;
        for (int i = 1; i <= m; ++i) fvars.push_back("F" + std::to_string(i));
        cp.outer = parse_expr_key(sec, "H", fvars);
        cp.y_a = sec.opt_number("y_a");
        cp.y_b = sec.opt_number("y_b");
        if (auto obj = sec.opt_string("objective")) {
            if (*obj == "min")
                pf.objective = Objective::minimize;
            else if (*obj == "max")
                pf.objective = Objective::maximize;
            else
                throw input_error(origin + ": composition.objective must be min or max");
        }
        if (sec.has("y")) {
            cand_text = sec.get("y").text;
            cand_line = sec.line_of("y");
        }
        if (sec.has("lambda")) pf.lambda = sec.number("lambda");
        sec.finish();
        if (rf.sections.count("composition.iso")) {
            SectionReader iso(rf, "composition.iso");
            CompositionProblem::Iso is;
            is.delta_g = iso.has("delta_g") ? parse_expr_list(iso, "delta_g", {"t", "y", "v"})
                                            : std::vector<Expression>{};
            is.nabla_g = iso.has("nabla_g") ? parse_expr_list(iso, "nabla_g", {"t", "y", "v"})
                                            : std::vector<Expression>{};
            int mg = static_cast<int>(is.delta_g.size() + is.nabla_g.size());
            std::vector<std::string> gvars;
            for (int i = 1; i <= mg; ++i) gvars.push_back("G" + std::to_string(i));
            is.outer = parse_expr_key(iso, "P", gvars);
            is.target = iso.number("d");
            iso.finish();
            cp.iso = std::move(is);
        }
        cp.validate();
        pf.composition = std::move(cp);
    } else if (present[0] == std::string("synthesis")) {
        pf.kind = ProblemFile::Kind::synthesis;
        SectionReader sec(rf, "synthesis");
        SynthesisSpec sp;
        sp.scale = scale_key(sec);
        sp.P = parse_expr_key(sec, "P", {"t", "y"});
        sp.q = parse_expr_key(sec, "q", {"t", "y"});
        sp.w = parse_expr_key(sec, "w", {"t", "y", "v"});
        sp.p = parse_expr_key(sec, "p", {"t"});
        sp.C = sec.number("C");
        sp.R0 = sec.number("R0");
        if (sec.has("y0")) {
            const RawValue& rv = sec.get("y0");
            sp.y0 = parse_trajectory(rv.text, sp.scale, origin, rv.line);
        }
        sec.finish();
        sp.validate();
        pf.synthesis = std::move(sp);
    } else {
        pf.kind = ProblemFile::Kind::helmholtz;
        SectionReader sec(rf, "helmholtz");
        ProblemFile::Helmholtz hh;
        hh.scale = scale_key(sec);
        hh.H = parse_expr_key(sec, "H", {"t", "y", "v"});
        hh.G = parse_expr_key(sec, "G", {"t", "y", "v"});
        if (auto tr = sec.opt_number("trials")) {
            if (*tr < 1 || *tr != std::floor(*tr))
                throw input_error(origin + ": helmholtz.trials must be a positive integer");
            hh.trials = static_cast<int>(*tr);
        }
        if (auto sd = sec.opt_number("seed")) {
            if (*sd < 0 || *sd != std::floor(*sd))
                throw input_error(origin + ": helmholtz.seed must be a non-negative integer");
            hh.seed = static_cast<std::uint64_t>(*sd);
        }
        sec.finish();
        pf.helmholtz = std::move(hh);
    }

    if (rf.sections.count("output")) {
        SectionReader sec(rf, "output");
        if (auto f = sec.opt_string("format")) {
            if (*f != "text" && *f != "json" && *f != "csv")
                throw input_error(origin + ": output.format must be text, json or csv");
            pf.format = *f;
        }
        pf.tolerance = sec.opt_number("tolerance");
        sec.finish();
    }

    if (cand_text) pf.candidate_y = parse_trajectory(*cand_text, pf.scale(), origin, cand_line);
    return pf;
}

ProblemFile load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open problem file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem_text(ss.str(), path);
}

} // namespace tsvar
