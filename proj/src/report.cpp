#include "tsvar/report.hpp"

#include <cstdio>
#include <sstream>

namespace tsvar {

std::string Report::format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void Report::add_scalar(const std::string& name, double value) {
    scalars_.push_back({name, Scalar::Kind::number, value, 0, {}});
}

void Report::add_int(const std::string& name, long long value) {
    scalars_.push_back({name, Scalar::Kind::integer, 0, value, {}});
}

void Report::add_text(const std::string& name, const std::string& value) {
    scalars_.push_back({name, Scalar::Kind::text, 0, 0, value});
}

void Report::add_column(const std::string& name, const std::vector<double>& t,
                        const std::vector<double>& v) {
    columns_.push_back({name, t, v});
}

void Report::add_grid(const std::string& name, const GridFunction& g) {
    std::vector<double> t, v;
    for (int i = g.lo(); i <= g.hi(); ++i) {
        t.push_back(g.scale()->point(i));
        v.push_back(g[i]);
    }
    add_column(name, t, v);
}

void Report::add_scale_summary(const TimeScale& ts) {
    add_text("scale", ts.provenance());
    add_int("scale_points", ts.size());
    add_text("scale_kind", ts.sampled() ? "sampled_dense" : "exact_isolated");
    if (ts.sampled()) add_scalar("scale_model_step", ts.model_step());
    ScaleProperties props = scale_properties(ts);
    add_text("scale_isolated", props.is_isolated ? "true" : "false");
    add_text("scale_regular", props.is_regular ? "true" : "false");
}

std::string Report::render_text() const {
    std::ostringstream os;
    os << "# " << command_ << "\n";
    size_t width = 0;
    for (const auto& s : scalars_) width = std::max(width, s.name.size());
    for (const auto& s : scalars_) {
        os << s.name << std::string(width - s.name.size() + 2, ' ');
        switch (s.kind) {
            case Scalar::Kind::number: os << format_double(s.num); break;
            case Scalar::Kind::integer: os << s.inum; break;
            case Scalar::Kind::text: os << s.text; break;
        }
        os << "\n";
    }
    for (const auto& c : columns_) {
        os << "\n" << c.name << " (t, value):\n";
        for (size_t i = 0; i < c.t.size(); ++i)
            os << "  " << format_double(c.t[i]) << "  " << format_double(c.v[i]) << "\n";
    }
    return os.str();
}

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace

std::string Report::render_json() const {
    std::ostringstream os;
    os << "{\n  \"command\": \"" << json_escape(command_) << "\"";
    for (const auto& s : scalars_) {
        os << ",\n  \"" << json_escape(s.name) << "\": ";
        switch (s.kind) {
            case Scalar::Kind::number: os << format_double(s.num); break;
            case Scalar::Kind::integer: os << s.inum; break;
            case Scalar::Kind::text: os << "\"" << json_escape(s.text) << "\""; break;
        }
    }
    for (const auto& c : columns_) {
        os << ",\n  \"" << json_escape(c.name) << "\": {\"t\": [";
        for (size_t i = 0; i < c.t.size(); ++i) os << (i ? ", " : "") << format_double(c.t[i]);
        os << "], \"value\": [";
        for (size_t i = 0; i < c.v.size(); ++i) os << (i ? ", " : "") << format_double(c.v[i]);
        os << "]}";
    }
    os << "\n}\n";
    return os.str();
}

std::string Report::render_csv() const {
    std::ostringstream os;
    os << "section,name,t,value\n";
    os << "meta,command,," << command_ << "\n";
    for (const auto& s : scalars_) {
        os << "scalar," << s.name << ",,";
        switch (s.kind) {
            case Scalar::Kind::number: os << format_double(s.num); break;
            case Scalar::Kind::integer: os << s.inum; break;
            case Scalar::Kind::text: os << s.text; break;
        }
        os << "\n";
    }
    for (const auto& c : columns_)
        for (size_t i = 0; i < c.t.size(); ++i)
            os << "column," << c.name << "," << format_double(c.t[i]) << ","
               << format_double(c.v[i]) << "\n";
    return os.str();
}

std::string Report::render(const std::string& format) const {
    if (format == "json") return render_json();
    if (format == "csv") return render_csv();
    return render_text();
}

} // namespace tsvar
