#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "brm/asymptotics.hpp"
#include "brm/bounds.hpp"
#include "brm/qp.hpp"
#include "brm/simulator.hpp"

namespace brm {

// Minimal ordered JSON writer. All floating-point output is printed with 17
// significant digits so runs are diffable and round-trip exactly.
class JsonWriter {
public:
    std::string str() const { return out_; }

    JsonWriter& begin_object() { return open('{'); }
    JsonWriter& end_object() { return close('}'); }
    JsonWriter& begin_array() { return open('['); }
    JsonWriter& end_array() { return close(']'); }

    JsonWriter& key(const std::string& k) {
        comma();
        append_string(k);
        out_ += ':';
        fresh_ = true;
        return *this;
    }

    JsonWriter& value(double v) {
        comma();
        char buf[40];
        if (std::isfinite(v)) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out_ += buf;
        } else if (std::isnan(v)) {
            out_ += "null";
        } else {
            out_ += v > 0 ? "\"inf\"" : "\"-inf\"";
        }
        return *this;
    }
    JsonWriter& value(int v) {
        comma();
        out_ += std::to_string(v);
        return *this;
    }
    JsonWriter& value(std::uint64_t v) {
        comma();
        out_ += std::to_string(v);
        return *this;
    }
    JsonWriter& value(bool v) {
        comma();
        out_ += v ? "true" : "false";
        return *this;
    }
    JsonWriter& value(const std::string& s) {
        comma();
        append_string(s);
        return *this;
    }
    JsonWriter& value(const char* s) { return value(std::string(s)); }

    template <typename T>
    JsonWriter& array(const std::vector<T>& v) {
        begin_array();
        for (const auto& x : v) value(x);
        return end_array();
    }
    JsonWriter& array(const Vector& v) {
        begin_array();
        for (int i = 0; i < v.size(); ++i) value(v[i]);
        return end_array();
    }

private:
    JsonWriter& open(char c) {
        comma();
        out_ += c;
        fresh_ = true;
        return *this;
    }
    JsonWriter& close(char c) {
        out_ += c;
        fresh_ = false;
        return *this;
    }
    void comma() {
        if (!fresh_ && !out_.empty()) {
            char last = out_.back();
            if (last != '{' && last != '[' && last != ':') out_ += ',';
        }
        fresh_ = false;
    }
    void append_string(const std::string& s) {
        out_ += '"';
        for (char c : s) {
            switch (c) {
                case '"': out_ += "\\\""; break;
                case '\\': out_ += "\\\\"; break;
                case '\n': out_ += "\\n"; break;
                case '\t': out_ += "\\t"; break;
                default: out_ += c;
            }
        }
        out_ += '"';
    }

    std::string out_;
    bool fresh_ = true;
};

inline std::vector<int> one_based(const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = idx[i] + 1;
    return out;
}

inline void write_mc(JsonWriter& w, const McEstimate& e) {
    w.begin_object();
    w.key("value").value(e.value);
    w.key("stderr").value(e.stderr_);
    w.key("ci95").begin_array().value(e.ci_lo).value(e.ci_hi).end_array();
    w.key("n_rep").value(e.n_rep);
    w.key("seed").value(e.seed);
    w.end_object();
}

inline void write_qp(JsonWriter& w, const QpSolution& s) {
    w.begin_object();
    w.key("a_tilde").array(s.a_tilde);
    w.key("I").array(one_based(s.index_I));
    w.key("J").array(one_based(s.index_J));
    w.key("U").array(one_based(s.index_U));
    w.key("lambda").array(s.lambda);
    w.key("value").value(s.value);
    w.key("m").value(s.m);
    w.key("boundary_degenerate").value(s.boundary_degenerate);
    w.end_object();
}

inline void write_pickands(JsonWriter& w, const PickandsEstimate& p) {
    w.begin_object();
    w.key("lambda_cap").value(p.lambda_cap);
    w.key("value");
    write_mc(w, p.value);
    w.key("prefactor").value(p.prefactor);
    w.key("cond_prob");
    write_mc(w, p.cond_prob);
    w.key("c_of_a");
    write_mc(w, p.c_of_a);
    w.end_object();
}

inline void write_asymptotic(JsonWriter& w, const AsymptoticEstimate& a) {
    w.begin_object();
    w.key("value").value(a.value);
    w.key("log_value").value(a.log_value);
    w.key("regime").value(a.regime == Regime::finite_horizon ? "finite_horizon"
                                                             : "infinite_horizon_lograte");
    w.key("terms").begin_array();
    for (const auto& t : a.terms) {
        w.begin_object();
        w.key("subset").array(one_based(t.subset));
        w.key("value").value(t.value);
        if (a.regime == Regime::infinite_horizon_lograte) {
            w.key("lograte").value(t.lograte);
            w.key("t_hat").value(t.t_hat);
        } else {
            w.key("qp");
            write_qp(w, t.qp);
            if (t.pickands) {
                w.key("pickands");
                write_pickands(w, *t.pickands);
            }
        }
        w.end_object();
    }
    w.end_array();
    w.key("dominant_subsets").begin_array();
    for (const auto& s : a.dominant_subsets) w.array(one_based(s));
    w.end_array();
    if (!a.warnings.empty()) w.key("warnings").array(a.warnings);
    w.end_object();
}

inline void write_bounds(JsonWriter& w, const BoundResult& b) {
    w.begin_object();
    w.key("lower");
    write_mc(w, b.lower);
    w.key("upper");
    write_mc(w, b.upper);
    w.key("k_const").value(b.k_const);
    w.key("per_subset_K_terms").begin_array();
    for (const auto& [mask, est] : b.per_subset_K_terms) {
        w.begin_object();
        std::vector<int> idx;
        for (int i = 0; i < 32; ++i)
            if (mask & (1u << i)) idx.push_back(i + 1);
        w.key("subset").array(idx);
        w.key("prob");
        write_mc(w, est);
        w.end_object();
    }
    w.end_array();
    if (!b.warnings.empty()) w.key("warnings").array(b.warnings);
    w.end_object();
}

inline void write_sim(JsonWriter& w, const SimResult& r, bool with_times = false) {
    w.begin_object();
    w.key("psi_hat");
    write_mc(w, r.psi_hat);
    w.key("n_paths").value(r.n_paths);
    w.key("grid").begin_object();
    w.key("s_start").value(r.grid.s_start());
    w.key("t_end").value(r.grid.t_end());
    w.key("n_steps").value(r.grid.n_steps());
    w.end_object();
    w.key("refinement_check")
        .begin_array()
        .value(r.refinement_check.first)
        .value(r.refinement_check.second)
        .end_array();
    w.key("grid_bias_warning").value(r.grid_bias_warning);
    if (std::isfinite(r.tail_bound_log)) w.key("tail_bound_log").value(r.tail_bound_log);
    if (with_times) w.key("hitting_times").array(r.hitting_times);
    if (!r.warnings.empty()) w.key("warnings").array(r.warnings);
    w.end_object();
}

}  // namespace brm
