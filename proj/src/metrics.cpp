#include "capdr/metrics.hpp"

#include "capdr/certs.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace capdr::metrics {

std::size_t trace_bits(std::size_t k, std::size_t num_latches, std::size_t num_inputs)
{
    return (k + 1) * num_latches + k * num_inputs;
}

std::size_t size_proxy(const Certificate& cert)
{
    if (const auto* safe = std::get_if<SafeCertificate>(&cert))
        return certs::literal_count(certs::canonicalize(safe->inv));
    const auto& trace = std::get<UnsafeCertificate>(cert).trace;
    const std::size_t nx = trace.states.empty() ? 0 : trace.states.front().size();
    const std::size_t nu = trace.inputs.empty() ? 0 : trace.inputs.front().size();
    return trace_bits(trace.length(), nx, nu);
}

double scalarize(const CostVector& cv, const Weights& w)
{
    if (w.alpha < 0 || w.beta < 0 || w.gamma < 0)
        throw std::invalid_argument("scalarize: weights must be non-negative");
    return w.alpha * cv.t + w.beta * cv.size + w.gamma * cv.t_chk;
}

double jaccard_distance(const Cnf& a, const Cnf& b)
{
    const auto ca = certs::canonicalize(a);
    const auto cb = certs::canonicalize(b);
    Cnf inter, uni;
    std::set_intersection(ca.begin(), ca.end(), cb.begin(), cb.end(), std::back_inserter(inter), ClauseLess{});
    std::set_union(ca.begin(), ca.end(), cb.begin(), cb.end(), std::back_inserter(uni), ClauseLess{});
    if (uni.empty())
        return 0.0;
    return 1.0 - double(inter.size()) / double(uni.size());
}

double median(std::vector<double> values)
{
    if (values.empty())
        throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string csv_header()
{
    return "instance,verdict,t,size,t_chk,J";
}

std::string csv_row(const std::string& instance, const std::string& verdict, const CostVector& cv, const Weights& w)
{
    std::ostringstream os;
    os.precision(9);
    os << instance << ',' << verdict << ',' << cv.t << ',' << cv.size << ',' << cv.t_chk << ',' << scalarize(cv, w);
    return os.str();
}

} // namespace capdr::metrics
