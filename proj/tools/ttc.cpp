// ttc: compile, inspect, estimate, evaluate and serve lookup-table circuits.

#include <atomic>
#include <csignal>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ttc/circuit.hpp"
#include "ttc/cost.hpp"
#include "ttc/data.hpp"
#include "ttc/engine.hpp"
#include "ttc/error.hpp"
#include "ttc/protocol.hpp"
#include "ttc/synth.hpp"
#include "ttc/transport.hpp"

namespace {

using namespace ttc;

std::atomic<bool> g_stop{false};

std::vector<std::vector<double>> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open input file");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no), "'" + cell + "' is not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::uint8_t> to_bits(const Circuit& c, const std::vector<double>& row) {
  if (c.front_end.kind == FrontEnd::Kind::Binarize) {
    if (row.size() != static_cast<std::size_t>(c.input_bits())) {
      throw ShapeError("input", "expected " + std::to_string(c.input_bits()) + " values, got " +
                                    std::to_string(row.size()));
    }
    return binarize_input(c.front_end, row);
  }
  std::vector<std::uint8_t> bits;
  for (double v : row) {
    if (v != 0.0 && v != 1.0) throw ShapeError("input", "precomputed input must be 0 or 1");
    bits.push_back(v == 1.0);
  }
  return bits;
}

void print_scores(int index, int label, const std::vector<std::int64_t>& ints,
                  const std::vector<double>& scores) {
  std::cout << index << ": label " << label << " int_scores [";
  for (std::size_t k = 0; k < ints.size(); ++k) std::cout << (k ? ", " : "") << ints[k];
  std::cout << "] scores [";
  for (std::size_t k = 0; k < scores.size(); ++k) {
    std::cout << (k ? ", " : "") << std::setprecision(6) << scores[k];
  }
  std::cout << "]\n";
}

void print_constraints(const ConstraintReport& r) {
  std::cerr << "max bitwidth " << r.max_bitwidth << " (lookup " << r.max_lut_bitwidth
            << ", accumulator " << r.acc_bits << "), chunk size " << r.chunk_size << ", "
            << r.chunk_count << " chunks\n";
  for (const auto& [bw, n] : r.calls_by_bitwidth) {
    std::cerr << "  " << n << " calls at " << bw << " bits\n";
  }
  for (const auto& i : r.issues) {
    const char* sev = i.severity == Severity::Error ? "error" : i.severity == Severity::Warning ? "warning" : "info";
    std::cerr << sev << " [" << i.code << "]: " << i.message << "\n";
  }
}

int exit_code(const Error& e) {
  const std::string& k = e.kind();
  if (k == "ConstraintError" || k == "ConstraintViolation") return 3;
  if (k == "TransportError" || k == "FrameError") return 4;
  return 2;
}

std::string config_path(const std::string& given, const char* file) {
  return given.empty() ? std::string(TTC_CONFIG_DIR) + "/" + file : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lookup-table circuit compiler and inference runtime"};
  app.require_subcommand(1);

  // compile
  auto* compile_cmd = app.add_subcommand("compile", "Lower a model file into a circuit");
  std::string model_path, out_path;
  int chunk_size = kDefaultChunkSize, acc_bits = kDefaultAccBits, threads = 0;
  bool no_raise = false, no_dedup = false, serial = false;
  compile_cmd->add_option("model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  compile_cmd->add_option("-o,--output", out_path, "Circuit file to write")->required();
  compile_cmd->add_option("--chunk-size", chunk_size, "Features per accumulator chunk");
  compile_cmd->add_option("--acc-bits", acc_bits, "Declared accumulator width");
  compile_cmd->add_flag("--no-raise", no_raise, "Keep --acc-bits even if chunks can overflow it");
  compile_cmd->add_flag("--no-dedup", no_dedup, "Store one table per output channel");
  compile_cmd->add_flag("--serial", serial, "Use the serial extraction kernel");
  compile_cmd->add_option("--threads", threads, "OpenMP threads (0 = default)");

  // check
  auto* check_cmd = app.add_subcommand("check", "Report execution constraints of a circuit");
  std::string circuit_path;
  check_cmd->add_option("circuit", circuit_path, "Circuit or model file")->required()->check(CLI::ExistingFile);

  // estimate
  auto* est_cmd = app.add_subcommand("estimate", "Estimate encrypted inference cost");
  int cores = 1;
  bool as_json = false;
  std::string timing_path, calib_path;
  est_cmd->add_option("circuit", circuit_path, "Circuit or model file")->required()->check(CLI::ExistingFile);
  est_cmd->add_option("--cores", cores, "CPU cores")->check(CLI::PositiveNumber);
  est_cmd->add_flag("--json", as_json, "Machine-readable output");
  est_cmd->add_option("--timing", timing_path, "Lookup timing table");
  est_cmd->add_option("--calibration", calib_path, "Size calibration");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time serial and OpenMP evaluation");
  std::string inputs_path;
  int repeat = 3;
  bench_cmd->add_option("circuit", circuit_path, "Circuit or model file")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--inputs", inputs_path, "Samples, one per line")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--threads", threads, "OpenMP threads (0 = default)");
  bench_cmd->add_option("--repeat", repeat, "Passes over the inputs")->check(CLI::PositiveNumber);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Classify samples locally or through a server");
  std::string remote, setting_str, model_id;
  bool simulate = false;
  infer_cmd->add_option("--model", model_path, "Circuit or model file")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--input", inputs_path, "Samples, one per line")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--remote", remote, "Server address host:port");
  infer_cmd->add_option("--setting", setting_str, "full or split (default from the model front end)");
  infer_cmd->add_option("--model-id", model_id, "Id on the server (default: file stem)");
  infer_cmd->add_flag("--simulate", simulate, "Track accumulator bounds while evaluating");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve every model in a directory");
  std::string models_dir, listen = "127.0.0.1:7878";
  serve_cmd->add_option("--models", models_dir, "Directory of model/circuit files")->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--listen", listen, "Listen address host:port");

  // tables
  auto* tables_cmd = app.add_subcommand("tables", "Print truth tables as bit strings");
  tables_cmd->add_option("model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  std::string dump_path;
  tables_cmd->add_option("--check", dump_path, "Compare against a table dump instead of printing")
      ->check(CLI::ExistingFile);

  // accuracy
  auto* acc_cmd = app.add_subcommand("accuracy", "Score a circuit on a tabular dataset over k folds");
  std::string schema_path, data_path;
  int folds = 5;
  std::uint64_t split_seed = 0;
  acc_cmd->add_option("--model", model_path, "Circuit or model file")->required()->check(CLI::ExistingFile);
  acc_cmd->add_option("--schema", schema_path, "Tabular schema")->required()->check(CLI::ExistingFile);
  acc_cmd->add_option("--data", data_path, "CSV file")->required()->check(CLI::ExistingFile);
  acc_cmd->add_option("--folds", folds, "Number of 80/20 folds")->check(CLI::PositiveNumber);
  acc_cmd->add_option("--split-seed", split_seed, "Split RNG seed");
  acc_cmd->add_option("--threads", threads, "OpenMP threads (0 = default)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a randomly weighted model of a reference shape");
  std::string arch;
  std::uint64_t seed = 1;
  synth_cmd->add_option("--arch", arch, "Architecture")->required()->check(CLI::IsMember(synth_architectures()));
  synth_cmd->add_option("--seed", seed, "RNG seed");
  synth_cmd->add_option("-o,--output", out_path, "Model file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compile_cmd) {
      CompileOptions opts;
      opts.chunk_size = chunk_size;
      opts.acc_bits = acc_bits;
      opts.raise_acc_bits = !no_raise;
      opts.dedup_tables = !no_dedup;
      opts.extract.parallel = !serial;
      opts.extract.threads = threads;
      const Circuit c = compile(load_model(model_path), opts);
      save_circuit(c, out_path);
      const ConstraintReport r = check_constraints(c);
      print_constraints(r);
      std::cerr << "wrote " << out_path << ": " << c.tables.size() << " tables, "
                << c.lut_calls.size() << " lookup calls, " << c.feature_count() << " features\n";
      return r.ok() ? 0 : 3;
    }
    if (*check_cmd) {
      const ConstraintReport r = check_constraints(load_model_or_circuit(circuit_path));
      print_constraints(r);
      return r.ok() ? 0 : 3;
    }
    if (*est_cmd) {
      const Circuit c = load_model_or_circuit(circuit_path);
      const LutTimingTable timing = load_timing_table(config_path(timing_path, "lut_timing.json"));
      const SizeCalibration calib = load_size_calibration(config_path(calib_path, "size_calibration.json"));
      const CostReport r = estimate(c, cores, timing, calib);
      std::cout << (as_json ? report_json(r) + "\n" : format_report(r));
      return 0;
    }
    if (*bench_cmd) {
      const Circuit c = load_model_or_circuit(circuit_path);
      std::vector<std::vector<std::uint8_t>> inputs;
      for (const auto& row : read_samples(inputs_path)) inputs.push_back(to_bits(c, row));
      if (inputs.empty()) throw ParseError(inputs_path, "no samples");
      auto run = [&](bool parallel, std::vector<Partials>& out) {
        EvalOptions o;
        o.parallel = parallel;
        o.threads = threads;
        const auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < repeat; ++r) {
          out.clear();
          for (const auto& in : inputs) out.push_back(eval_cleartext(c, in, o).partials);
        }
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      };
      std::vector<Partials> serial_out, omp_out;
      const double ts = run(false, serial_out);
      const double tp = run(true, omp_out);
      const double evals = static_cast<double>(inputs.size()) * repeat;
      std::cout << std::fixed << std::setprecision(3);
      std::cout << "samples " << inputs.size() << ", passes " << repeat << "\n";
      std::cout << "serial: " << ts * 1e6 / evals << " us/sample\n";
      std::cout << "openmp: " << tp * 1e6 / evals << " us/sample (" << ts / tp << "x)\n";
      if (serial_out != omp_out) {
        std::cerr << "serial and OpenMP partials differ\n";
        return 1;
      }
      std::cout << "partials identical\n";
      return 0;
    }
    if (*infer_cmd) {
      const Circuit c = load_model_or_circuit(model_path);
      const auto rows = read_samples(inputs_path);
      if (model_id.empty()) model_id = std::filesystem::path(model_path).stem().string();
      const ClientManifest manifest = manifest_of(c, model_id);
      const Setting setting = setting_str.empty()
                                  ? (c.front_end.kind == FrontEnd::Kind::PrecomputedBinary ? Setting::SplitFeatures
                                                                                           : Setting::FullPr)
                                  : parse_setting(setting_str);
      if (!remote.empty()) {
        Client client(parse_endpoint(remote));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const InferenceRequest req = client_encode(rows[i], manifest, setting, i + 1);
          const InferenceResponse resp = client.infer(req);
          if (resp.model_version != circuit_version(c)) {
            std::cerr << "warning: server model version " << resp.model_version
                      << " differs from the local file\n";
          }
          const ClientResult r = client_finalize(resp, manifest);
          print_scores(static_cast<int>(i), r.label, r.int_scores, r.scores);
        }
        return 0;
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const InferenceRequest req = client_encode(rows[i], manifest, setting, i + 1);
        InferenceResult r;
        if (simulate) {
          auto [res, trace] = eval_simulated(c, req.payload);
          r = std::move(res);
          std::cerr << i << ": " << trace.total_calls() << " lookups, max sub-sum "
                    << trace.max_accumulator_value << "\n";
        } else {
          r = eval_cleartext(c, req.payload);
        }
        print_scores(static_cast<int>(i), r.label, r.int_scores, r.scores);
      }
      return 0;
    }
    if (*serve_cmd) {
      const ModelRegistry registry = ModelRegistry::load_dir(models_dir);
      Server server(registry, parse_endpoint(listen));
      server.start();
      std::cerr << "serving " << registry.size() << " model(s) on port " << server.port() << ":";
      for (const auto& id : registry.ids()) std::cerr << " " << id;
      std::cerr << std::endl;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      std::cerr << "served " << server.requests_served() << " request(s)\n";
      return 0;
    }
    if (*tables_cmd) {
      const ModelSpec m = load_model(model_path);
      if (dump_path.empty()) {
        std::cout << format_table_dump(m);
        return 0;
      }
      std::ifstream in(dump_path);
      const std::string dump{std::istreambuf_iterator<char>(in), {}};
      const DumpCheck r = check_table_dump(m, dump);
      if (!r.ok) {
        std::cerr << "mismatch: " << r.message << "\n";
        return 1;
      }
      std::cout << "tables match\n";
      return 0;
    }
    if (*acc_cmd) {
      const Circuit c = load_model_or_circuit(model_path);
      const TabularSchema schema = load_schema(schema_path);
      const RawTable raw = read_csv(data_path, schema);
      const auto splits = make_splits(raw.rows(), {folds, 1.0 / folds, split_seed});
      std::vector<double> acc;
      for (std::size_t f = 0; f < splits.size(); ++f) {
        // Quantiles and top-k categories come from the training rows of each fold.
        const Dataset d = binarize_table(raw, fit_schema(schema, raw, splits[f].train));
        acc.push_back(accuracy(c, d, splits[f].test, threads));
        std::cout << "fold " << f << ": " << std::fixed << std::setprecision(4) << acc.back()
                  << " on " << splits[f].test.size() << " rows\n";
      }
      double mean = 0.0;
      for (double a : acc) mean += a / acc.size();
      double var = 0.0;
      for (double a : acc) var += (a - mean) * (a - mean) / acc.size();
      std::cout << "mean " << mean << " std " << std::sqrt(var) << "\n";
      return 0;
    }
    if (*synth_cmd) {
      save_model(synth_model(arch, seed), out_path);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e);
  }
  return 0;
}
