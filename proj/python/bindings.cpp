#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "hboa/bayesnet.hpp"
#include "hboa/bias_miner.hpp"
#include "hboa/engine.hpp"
#include "hboa/errors.hpp"
#include "hboa/experiment.hpp"
#include "hboa/problems.hpp"

namespace py = pybind11;
using namespace hboa;

namespace {

BitString to_bits(const std::vector<int>& bits) {
    BitString x(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != 0 && bits[i] != 1) throw InputError("bit strings hold 0 and 1 only");
        x[i] = static_cast<std::uint8_t>(bits[i]);
    }
    return x;
}

std::vector<int> from_bits(const BitString& x) { return {x.begin(), x.end()}; }

Population to_population(const std::vector<std::vector<int>>& rows) {
    Population pop;
    for (const auto& r : rows) pop.members.push_back(to_bits(r));
    return pop;
}

py::dict stats_dict(const RunStats& s) {
    py::dict d;
    d["evaluations"] = s.evaluations;
    d["hc_steps"] = s.hc_steps;
    d["iterations"] = s.iterations;
    d["success"] = s.success;
    d["converged"] = s.converged;
    d["wall_time"] = s.wall_time;
    d["population_size"] = s.population_size;
    d["best_fitness"] = s.best_fitness;
    return d;
}

EngineConfig engine_config(std::size_t population_size, std::uint64_t seed, const std::string& mode, double kappa,
                           std::shared_ptr<const BiasTable> bias, bool hc, std::size_t max_iterations,
                           std::size_t rts_window) {
    EngineConfig cfg;
    cfg.population_size = population_size;
    cfg.seed = seed;
    cfg.hc_enabled = hc;
    cfg.max_iterations = max_iterations;
    cfg.rts_window = rts_window;
    if (mode == "bias") {
        if (!bias) throw ConfigError("bias mode needs a bias table");
        cfg.score.mode = PriorMode::distance_bias;
        cfg.score.kappa = kappa;
        cfg.score.bias = std::move(bias);
    } else if (mode != "penalty") {
        throw ConfigError("mode must be 'penalty' or 'bias'");
    }
    return cfg;
}

py::dict summary_dict(const SpeedupSummary& s) {
    auto spread_dict = [](const Spread& sp) {
        py::dict d;
        d["q1"] = sp.q1;
        d["median"] = sp.median;
        d["q3"] = sp.q3;
        d["mean"] = sp.mean;
        return d;
    };
    py::dict d;
    d["n"] = s.n;
    d["kappa"] = s.kappa;
    d["count"] = s.count;
    d["wall_time"] = s.wall_time ? py::object(spread_dict(*s.wall_time)) : py::object(py::none());
    d["evaluations"] = spread_dict(s.evaluations);
    d["hc_steps"] = spread_dict(s.hc_steps);
    d["population_size"] = spread_dict(s.population_size);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "hBOA with distance-based model bias";

    auto base = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<StructureError>(m, "StructureError", PyExc_RuntimeError);
    py::register_exception<CapabilityError>(m, "CapabilityError", PyExc_RuntimeError);
    py::register_exception<UnsolvableError>(m, "UnsolvableError", PyExc_RuntimeError);
    (void)base;

    py::class_<AdditiveProblem>(m, "Problem")
        .def(py::init([](std::size_t n, std::vector<std::vector<std::size_t>> subsets,
                         std::vector<std::vector<double>> tables) {
                 return AdditiveProblem(n, std::move(subsets), std::move(tables));
             }),
             py::arg("n"), py::arg("subsets"), py::arg("tables"))
        .def_property_readonly("n", &AdditiveProblem::size)
        .def_property_readonly("subsets", &AdditiveProblem::subsets)
        .def_property_readonly("tables", &AdditiveProblem::tables)
        .def("evaluate", [](const AdditiveProblem& p, const std::vector<int>& x) {
            if (x.size() != p.size()) throw InputError("bit string length does not match the problem");
            return evaluate(p, to_bits(x));
        })
        .def("distances", [](const AdditiveProblem& p) {
            const DistanceMatrix d = distance_matrix(p);
            std::vector<std::vector<std::size_t>> out(p.size(), std::vector<std::size_t>(p.size()));
            for (std::size_t i = 0; i < p.size(); ++i)
                for (std::size_t j = 0; j < p.size(); ++j) out[i][j] = d(i, j);
            return out;
        })
        .def("__len__", &AdditiveProblem::size);

    py::class_<Instance>(m, "Instance")
        .def_readonly("problem", &Instance::problem)
        .def_property_readonly("kind", [](const Instance& i) { return to_string(i.meta.kind); })
        .def_property_readonly("seed", [](const Instance& i) { return i.meta.seed; })
        .def("save", [](const Instance& i, const std::string& path) { save_instance(path, i); })
        .def("__str__", [](const Instance& i) {
            std::ostringstream out;
            write_instance(out, i);
            return out.str();
        });

    m.def("generate_nk", [](std::size_t n, std::size_t k, std::uint64_t seed) { return make_nk_instance({n, k, seed}); },
          py::arg("n"), py::arg("k"), py::arg("seed"));
    m.def("generate_spin_glass",
          [](std::size_t L, std::uint64_t seed) { return make_spin_glass_instance(make_spin_glass_spec(L, seed)); },
          py::arg("L"), py::arg("seed"));
    m.def("load_instance", &load_instance, py::arg("path"));
    m.def("solve_exact", [](const Instance& i) {
        const ExactSolution s = solve_exact(i);
        return py::make_tuple(s.value, from_bits(s.witness));
    }, py::arg("instance"));

    py::class_<BiasTable, std::shared_ptr<BiasTable>>(m, "BiasTable")
        .def_property_readonly("n", &BiasTable::size)
        .def_property_readonly("observations", &BiasTable::observations)
        .def_property_readonly("pooled", &BiasTable::pooled)
        .def_property_readonly("p_floor", &BiasTable::p_floor)
        .def("probability", &BiasTable::probability, py::arg("d"), py::arg("j"), py::arg("k"))
        .def("save", [](const BiasTable& t, const std::string& path) { save_bias_table(path, t); });
    m.def("load_bias_table", [](const std::string& path) { return std::make_shared<BiasTable>(load_bias_table(path)); },
          py::arg("path"));
    m.def("mine",
          [](const std::vector<std::string>& archives, const Instance& instance, const std::set<std::string>& exclude,
             bool pooled) {
              ModelArchive all;
              for (const auto& path : archives) {
                  ModelArchive a = exclude_instances(load_archive(path), exclude);
                  if (all.records.empty()) all.meta = a.meta;
                  all.records.insert(all.records.end(), a.records.begin(), a.records.end());
              }
              const auto agg = pooled ? BiasAggregation::pooled : BiasAggregation::per_variable;
              return std::make_shared<BiasTable>(build_bias_table(all, distance_matrix(instance.problem), agg));
          },
          py::arg("archives"), py::arg("instance"), py::arg("exclude") = std::set<std::string>{},
          py::arg("pooled") = false);

    m.def("build_model",
          [](const std::vector<std::vector<int>>& selected, const AdditiveProblem& problem, const std::string& mode,
             double kappa, std::shared_ptr<const BiasTable> bias) {
              const EngineConfig cfg = engine_config(2, 0, mode, kappa, std::move(bias), true, 0, 0);
              return model_to_string(build_model(to_population(selected), cfg.score, distance_matrix(problem)));
          },
          py::arg("selected"), py::arg("problem"), py::arg("mode") = "penalty", py::arg("kappa") = 1.0,
          py::arg("bias") = nullptr, "Greedy decision-tree network; returned in its text form.");
    m.def("sample",
          [](const std::string& model, std::size_t n, std::size_t count, std::uint64_t seed) {
              Rng rng(seed);
              const Population pop = sample(model_from_string(model, n), count, rng);
              std::vector<std::vector<int>> out;
              for (const auto& x : pop.members) out.push_back(from_bits(x));
              return out;
          },
          py::arg("model"), py::arg("n"), py::arg("count"), py::arg("seed"));
    m.def("bde_leaf_logscore", &bde_leaf_logscore, py::arg("m0"), py::arg("m1"), py::arg("prior") = 1.0);

    auto run_fn = [](const AdditiveProblem& problem, const std::string& kind, std::size_t population_size,
                     std::uint64_t seed, const std::string& mode, double kappa, std::shared_ptr<const BiasTable> bias,
                     std::optional<double> optimum, bool hc, std::size_t max_iterations, std::size_t rts_window,
                     std::optional<std::string> archive_out, const std::string& instance_id) {
        const EngineConfig cfg =
            engine_config(population_size, seed, mode, kappa, std::move(bias), hc, max_iterations, rts_window);
        std::vector<ModelRecord> records;
        ModelObserver observer;
        const std::uint64_t fingerprint = distance_matrix(problem).fingerprint();
        if (archive_out)
            observer = [&](std::size_t iteration, const DtBayesNet& model) {
                records.push_back({instance_id, 0, iteration, fingerprint, model});
            };
        RunResult r;
        {
            py::gil_scoped_release release;
            r = run(problem, cfg, optimum, observer);
        }
        if (archive_out) append_records(*archive_out, ArchiveMeta{kind, problem.size(), mode}, records);
        py::dict d = stats_dict(r.stats);
        std::vector<std::vector<int>> members;
        for (const auto& x : r.population.members) members.push_back(from_bits(x));
        d["population"] = members;
        d["fitness"] = r.population.fitness;
        d["models"] = records.size();
        return d;
    };
    m.def("run",
          [run_fn](const Instance& instance, std::size_t population_size, std::uint64_t seed, const std::string& mode,
                   double kappa, std::shared_ptr<const BiasTable> bias, std::optional<double> optimum, bool hc,
                   std::size_t max_iterations, std::size_t rts_window, std::optional<std::string> archive_out,
                   const std::string& instance_id) {
              return run_fn(instance.problem, to_string(instance.meta.kind), population_size, seed, mode, kappa,
                            std::move(bias), optimum, hc, max_iterations, rts_window, archive_out, instance_id);
          },
          py::arg("instance"), py::arg("population_size"), py::arg("seed") = 0, py::arg("mode") = "penalty",
          py::arg("kappa") = 1.0, py::arg("bias") = nullptr, py::arg("optimum") = std::nullopt, py::arg("hc") = true,
          py::arg("max_iterations") = 0, py::arg("rts_window") = 0, py::arg("archive_out") = std::nullopt,
          py::arg("instance_id") = "run");
    m.def("run",
          [run_fn](const AdditiveProblem& problem, std::size_t population_size, std::uint64_t seed,
                   const std::string& mode, double kappa, std::shared_ptr<const BiasTable> bias,
                   std::optional<double> optimum, bool hc, std::size_t max_iterations, std::size_t rts_window,
                   std::optional<std::string> archive_out, const std::string& instance_id) {
              return run_fn(problem, "ADF", population_size, seed, mode, kappa, std::move(bias), optimum, hc,
                            max_iterations, rts_window, archive_out, instance_id);
          },
          py::arg("problem"), py::arg("population_size"), py::arg("seed") = 0, py::arg("mode") = "penalty",
          py::arg("kappa") = 1.0, py::arg("bias") = nullptr, py::arg("optimum") = std::nullopt, py::arg("hc") = true,
          py::arg("max_iterations") = 0, py::arg("rts_window") = 0, py::arg("archive_out") = std::nullopt,
          py::arg("instance_id") = "run");

    m.def("bisection",
          [](const AdditiveProblem& problem, double optimum, std::uint64_t seed, const std::string& mode, double kappa,
             std::shared_ptr<const BiasTable> bias, std::size_t initial, std::size_t runs, double ratio,
             std::size_t cap) {
              const EngineConfig tmpl = engine_config(initial, 0, mode, kappa, std::move(bias), true, 0, 0);
              BisectionConfig cfg;
              cfg.initial = initial;
              cfg.runs = runs;
              cfg.ratio = ratio;
              cfg.cap = cap;
              cfg.base_seed = seed;
              BisectionResult r;
              {
                  py::gil_scoped_release release;
                  r = bisection(problem, tmpl, optimum, cfg);
              }
              py::dict d;
              d["population_size"] = r.population_size;
              d["failing_lower"] = r.failing_lower;
              py::list rs;
              for (const auto& s : r.runs) rs.append(stats_dict(s));
              d["runs"] = rs;
              py::list trials;
              for (const auto& t : r.trials) trials.append(py::make_tuple(t.population_size, t.runs, t.successes));
              d["trials"] = trials;
              return d;
          },
          py::arg("problem"), py::arg("optimum"), py::arg("seed") = 0, py::arg("mode") = "penalty",
          py::arg("kappa") = 1.0, py::arg("bias") = nullptr, py::arg("initial") = 32, py::arg("runs") = 10,
          py::arg("ratio") = 1.05, py::arg("cap") = std::size_t{1} << 20);

    m.def("crossvalidate",
          [](const std::string& plan_path, std::optional<std::string> out_dir, std::optional<std::size_t> threads) {
              ExperimentPlan plan = load_plan(plan_path);
              if (out_dir) plan.output_dir = *out_dir;
              if (threads) plan.threads = *threads;
              CrossValidationResult r;
              {
                  py::gil_scoped_release release;
                  r = crossvalidate(plan);
              }
              py::dict d;
              py::list summaries;
              for (const auto& s : r.summaries) summaries.append(summary_dict(s));
              d["summaries"] = summaries;
              std::size_t leaks = 0;
              for (const auto& p : r.provenance) leaks += leaked_instances(p).size();
              d["leaked"] = leaks;
              d["folds"] = r.folds;
              d["instances"] = r.instance_ids;
              return d;
          },
          py::arg("plan"), py::arg("out_dir") = std::nullopt, py::arg("threads") = std::nullopt);
}
