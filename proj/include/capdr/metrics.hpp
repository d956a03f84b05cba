#pragma once

#include "capdr/types.hpp"

#include <iosfwd>
#include <span>
#include <string>

namespace capdr::metrics {

struct CostVector
{
    double t = 0;     // solve seconds
    double size = 0;  // certificate-size proxy
    double t_chk = 0; // checker seconds
};

struct Weights
{
    double alpha = 1.0;
    double beta = 1e-3;
    double gamma = 1.0;
};

// lit(Inv) over the canonical clause set for SAFE; (k+1)|X| + k|U| for a
// trace. Widths are taken from the trace itself.
std::size_t size_proxy(const Certificate& cert);
std::size_t trace_bits(std::size_t k, std::size_t num_latches, std::size_t num_inputs);

// J = α·t + β·size + γ·t_chk. Weights must be non-negative.
double scalarize(const CostVector& cv, const Weights& w = {});

// 1 - |A∩B| / |A∪B| on canonicalized clause sets; 0 when both are empty.
double jaccard_distance(const Cnf& a, const Cnf& b);

double median(std::vector<double> values);

// "instance,verdict,t,size,t_chk,J"
std::string csv_header();
std::string csv_row(const std::string& instance, const std::string& verdict, const CostVector& cv, const Weights& w);

} // namespace capdr::metrics
