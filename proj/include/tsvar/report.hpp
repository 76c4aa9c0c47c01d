#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsvar/timescale.hpp"

namespace tsvar {

// Deterministic report: ordered scalars, verdict strings and named columns.
// Floats render with 17 significant digits in the machine formats so every
// value round-trips; rendering the same report twice is byte-identical.
class Report {
  public:
    explicit Report(std::string command_echo) : command_(std::move(command_echo)) {}

    void add_scalar(const std::string& name, double value);
    void add_int(const std::string& name, long long value);
    void add_text(const std::string& name, const std::string& value);

    // A named column of (t, value) pairs.
    void add_column(const std::string& name, const std::vector<double>& t,
                    const std::vector<double>& v);
    void add_grid(const std::string& name, const GridFunction& g);

    void add_scale_summary(const TimeScale& ts);

    std::string render_text() const;
    std::string render_json() const;
    std::string render_csv() const;
    std::string render(const std::string& format) const;

    static std::string format_double(double v); // %.17g

  private:
    struct Scalar {
        std::string name;
        enum class Kind { number, integer, text } kind;
        double num = 0;
        long long inum = 0;
        std::string text;
    };
    struct Column {
        std::string name;
        std::vector<double> t, v;
    };
    std::string command_;
    std::vector<Scalar> scalars_;
    std::vector<Column> columns_;
};

} // namespace tsvar
