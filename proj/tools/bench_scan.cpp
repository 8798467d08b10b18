// Compares the serial and parallel grid-scan kernels and checks that they
// produce bit-identical maps.
#include <chrono>
#include <cstdint>
#include <iostream>

#include "dmisac/harness.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

int main(int argc, char** argv) {
    using namespace dmisac;
    std::uint64_t seed = 1;
    double spacing = 10.0;
    if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);
    if (argc > 2) spacing = std::strtod(argv[2], nullptr);

    ScenarioConfig cfg = reference_scenario();
    cfg.grid.spacing_m = spacing;
    const PipelineState st = build_pipeline(cfg, seed, 0);
    const SensingContext ctx = make_context(st.scenario, st.frame, st.echoes);

    const auto t0 = std::chrono::steady_clock::now();
    const CostMap serial = scan_cost_map_serial(ctx, cfg.grid);
    const auto t1 = std::chrono::steady_clock::now();
    const CostMap parallel = scan_cost_map(ctx, cfg.grid);
    const auto t2 = std::chrono::steady_clock::now();

    const double serial_s = std::chrono::duration<double>(t1 - t0).count();
    const double parallel_s = std::chrono::duration<double>(t2 - t1).count();

    bool identical = serial.cost.size() == parallel.cost.size();
    for (std::size_t i = 0; identical && i < serial.cost.size(); ++i)
        identical = serial.cost[i] == parallel.cost[i];

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::cout << serial.nx << "x" << serial.ny << " cells, " << threads
              << " threads\n";
    std::cout << "serial   " << serial_s << " s\n";
    std::cout << "parallel " << parallel_s << " s (speedup "
              << serial_s / parallel_s << "x)\n";
    std::cout << "maps bit-identical: " << (identical ? "yes" : "NO") << "\n";
    return identical ? 0 : 1;
}
