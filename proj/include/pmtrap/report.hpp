#pragma once

// Deterministic CSV and text-table output plus the per-run manifest. Numbers
// are always formatted with %.10g so identical inputs give identical bytes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmtrap/common.hpp"

namespace pmtrap {

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open output file " + path);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void numbers(const std::string& label, const std::vector<double>& values) {
        out_ << label;
        for (double v : values) out_ << ',' << format_number(v);
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

/// Fixed-width text table for human-readable summaries.
class TextTable {
public:
    explicit TextTable(std::vector<std::string> headers) : headers_(std::move(headers)) {
        widths_.resize(headers_.size());
        for (std::size_t i = 0; i < headers_.size(); ++i) widths_[i] = headers_[i].size();
    }

    void row(std::vector<std::string> cells) {
        cells.resize(headers_.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
            widths_[i] = std::max(widths_[i], cells[i].size());
        rows_.push_back(std::move(cells));
    }

    std::string str() const {
        std::string s = line(headers_);
        std::string rule;
        for (std::size_t i = 0; i < widths_.size(); ++i) {
            if (i) rule += "  ";
            rule += std::string(widths_[i], '-');
        }
        s += rule + "\n";
        for (const auto& r : rows_) s += line(r);
        return s;
    }

private:
    std::string line(const std::vector<std::string>& cells) const {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) s += "  ";
            s += cells[i];
            s += std::string(widths_[i] - cells[i].size(), ' ');
        }
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s + "\n";
    }

    std::vector<std::string> headers_;
    std::vector<std::size_t> widths_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_manifest(const std::string& dir,
                           const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream out(std::filesystem::path(dir) / "manifest.txt", std::ios::trunc);
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
}

}  // namespace pmtrap
