#include "lram/e8.hpp"
#include "lram/kernel.hpp"
#include "lram/layer.hpp"
#include "lram/neighbor_table.hpp"
#include "lram/report.hpp"
#include "lram/torus.hpp"
#include "lram/training.hpp"
#include "lram/verify.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace lram;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Ints = py::array_t<int32_t, py::array::c_style | py::array::forcecast>;

Vec8 to_vec8(const Doubles& a) {
  if (a.size() != kDim) throw py::value_error("expected 8 coordinates");
  Vec8 v;
  std::copy_n(a.data(), kDim, v.begin());
  return v;
}

LatticePoint to_point(const Ints& a) {
  if (a.size() != kDim) throw py::value_error("expected 8 coordinates");
  LatticePoint k;
  std::copy_n(a.data(), kDim, k.coords.begin());
  return k;
}

template <class T, std::size_t N>
py::array_t<T> to_array(const std::array<T, N>& a) {
  return py::array_t<T>(N, a.data());
}

py::array_t<int32_t> points_array(const std::vector<LatticePoint>& pts) {
  py::array_t<int32_t> out({pts.size(), static_cast<std::size_t>(kDim)});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int j = 0; j < kDim; ++j) m(i, j) = pts[i][j];
  }
  return out;
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::span<const double> batch_input(const Doubles& z, const LayerShape& shape, std::size_t& batch) {
  const auto width = static_cast<py::ssize_t>(shape.input_width());
  if (z.ndim() != 2 || z.shape(1) != width) {
    throw py::value_error("input must have shape (batch, " + std::to_string(width) + ")");
  }
  batch = static_cast<std::size_t>(z.shape(0));
  return {z.data(), static_cast<std::size_t>(z.size())};
}

py::dict lookup_dict(const LookupResult& r) {
  py::array_t<uint64_t> slots(r.count);
  py::array_t<double> weights(r.count);
  py::array_t<double> grads({static_cast<std::size_t>(r.count), static_cast<std::size_t>(kDim)});
  auto g = grads.mutable_unchecked<2>();
  for (int i = 0; i < r.count; ++i) {
    slots.mutable_at(i) = r.entries[i].slot;
    weights.mutable_at(i) = r.entries[i].weight;
    for (int d = 0; d < kDim; ++d) g(i, d) = r.entries[i].grad[d];
  }
  py::dict d;
  d["slots"] = slots;
  d["weights"] = weights;
  d["grads"] = grads;
  d["total_weight"] = r.total_weight;
  d["retained_weight"] = r.retained_weight;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Differentiable key-value memory addressed by points of the 2E8 lattice.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.attr("TOP_K") = kTopK;
  m.attr("HEAD_INPUT_WIDTH") = kHeadInputWidth;
  m.attr("NEIGHBOR_COUNT") = kNeighborCount;

  // lattice
  m.def("is_lattice_point", [](const Ints& k) { return is_lattice_point(to_point(k).coords); });
  m.def("decode", [](const Doubles& q) { return to_array(decode(to_vec8(q)).coords); },
        "Nearest lattice point; ties resolve deterministically.");
  m.def("canonicalize", [](const Doubles& q) {
    const Canonical c = canonicalize(to_vec8(q));
    py::dict d;
    d["point"] = to_array(c.point);
    d["translation"] = to_array(c.iso.translation.coords);
    d["perm"] = to_array(c.iso.perm);
    d["signs"] = to_array(c.iso.signs);
    return d;
  });
  m.def("min_vectors", [] { return points_array(min_vectors()); });
  m.def("expected_support_count", &expected_support_count, py::arg("dimension"), py::arg("covering_radius"));

  // neighbour table
  m.def("neighbor_table", [] { return points_array(neighbor_table().points); });
  m.def("neighbor_table_checksum", [] { return checksum_hex(neighbor_table().checksum()); });
  m.def("generate_neighbor_table", [] {
    NeighborTable t;
    {
      py::gil_scoped_release release;
      t = generate_neighbor_table();
    }
    return points_array(t.points);
  });

  // kernel
  m.def("kernel", py::vectorize([](double d2) { return kernel_eval(d2); }), py::arg("d2"));
  m.def("total_weight", [](const Doubles& q) { return total_weight(to_vec8(q)); });
  m.def("neighborhood_stats", [](const Doubles& q, int top_k) {
    const NeighborhoodStats s = neighborhood_stats(to_vec8(q), top_k);
    py::dict d;
    d["total_weight"] = s.total_weight;
    d["support_count"] = s.support_count;
    d["top_k_weight"] = s.top_k_weight;
    return d;
  }, py::arg("q"), py::arg("top_k") = kTopK);

  // torus
  py::class_<TorusConfig>(m, "TorusConfig")
      .def(py::init<const Periods&>(), py::arg("periods"))
      .def_static("preset", &TorusConfig::preset, py::arg("name"))
      .def_property_readonly("periods", &TorusConfig::periods)
      .def_property_readonly("slot_count", &TorusConfig::slot_count)
      .def("__eq__", [](const TorusConfig& a, const TorusConfig& b) { return a == b; })
      .def("__repr__", [](const TorusConfig& c) { return "TorusConfig(slots=" + std::to_string(c.slot_count()) + ")"; });

  m.def("slot_index", [](const Ints& k, const TorusConfig& c) { return slot_index(to_point(k), c); });
  m.def("slot_representative",
        [](uint64_t s, const TorusConfig& c) { return to_array(slot_representative(s, c).coords); });
  m.def("wrap", [](const Doubles& q, const TorusConfig& c) { return to_array(wrap(to_vec8(q), c)); });

  py::class_<ValueTable>(m, "ValueTable", py::buffer_protocol())
      .def(py::init<uint64_t, std::size_t>(), py::arg("rows"), py::arg("dim"))
      .def("init_gaussian", &ValueTable::init_gaussian, py::arg("seed"))
      .def_property_readonly("rows", &ValueTable::rows)
      .def_property_readonly("dim", &ValueTable::dim)
      .def_buffer([](ValueTable& t) {
        return py::buffer_info(t.data().data(), sizeof(double), py::format_descriptor<double>::format(), 2,
                               {static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.dim())},
                               {static_cast<py::ssize_t>(t.dim() * sizeof(double)), py::ssize_t{sizeof(double)}});
      })
      .def("save", [](const ValueTable& t, const TorusConfig& c, const std::string& path) {
        save_checkpoint(t, c, path);
      })
      .def_static("load", [](const std::string& path) {
        Checkpoint ck = load_checkpoint(path);
        return py::make_tuple(std::move(ck.values), ck.config);
      });

  // layer
  m.def("lookup", [](const Doubles& q, const TorusConfig& c, int top_k) { return lookup_dict(lookup(to_vec8(q), c, top_k)); },
        py::arg("q"), py::arg("config"), py::arg("top_k") = kTopK);
  m.def("head_query", [](const Doubles& z, const TorusConfig& c) {
    const HeadQuery h = head_query(std::span<const double>(z.data(), z.size()), c);
    py::dict d;
    d["q"] = to_array(h.q);
    d["scale"] = h.scale;
    d["degenerate"] = h.degenerate;
    return d;
  });
  m.def("theta_forward", [](const Doubles& z, const TorusConfig& c, const ValueTable& values, int heads) {
    const LayerShape shape{heads, static_cast<int>(values.dim())};
    std::size_t batch = 0;
    const auto in = batch_input(z, shape, batch);
    std::vector<double> out;
    {
      py::gil_scoped_release release;
      out = theta_forward(in, batch, c, shape, values);
    }
    py::array_t<double> result({batch, static_cast<std::size_t>(shape.output_width())});
    std::copy(out.begin(), out.end(), result.mutable_data());
    return result;
  }, py::arg("z"), py::arg("config"), py::arg("values"), py::arg("heads") = 1);
  m.def("theta_backward", [](const Doubles& z, const TorusConfig& c, const ValueTable& values, const Doubles& upstream,
                             int heads) {
    const LayerShape shape{heads, static_cast<int>(values.dim())};
    std::size_t batch = 0;
    const auto in = batch_input(z, shape, batch);
    if (static_cast<std::size_t>(upstream.size()) != batch * shape.output_width()) {
      throw py::value_error("upstream gradient must have shape (batch, heads * dim)");
    }
    ThetaGrad g;
    {
      py::gil_scoped_release release;
      g = theta_backward(in, batch, c, shape, values, {upstream.data(), static_cast<std::size_t>(upstream.size())});
    }
    py::array_t<double> gin({batch, static_cast<std::size_t>(shape.input_width())});
    std::copy(g.grad_input.begin(), g.grad_input.end(), gin.mutable_data());
    py::array_t<uint64_t> slots(g.grad_values.slots.size(), g.grad_values.slots.data());
    py::array_t<double> rows({g.grad_values.size(), g.grad_values.dim});
    std::copy(g.grad_values.rows.begin(), g.grad_values.rows.end(), rows.mutable_data());
    return py::make_tuple(gin, slots, rows);
  }, py::arg("z"), py::arg("config"), py::arg("values"), py::arg("upstream"), py::arg("heads") = 1,
     "Returns (grad_input, touched_slots, grad_rows).");

  // statistics, verification, training
  m.def("support_statistics", [](uint64_t samples, uint64_t seed, int threads) {
    SupportSampleStats s;
    {
      py::gil_scoped_release release;
      s = sample_support_statistics(samples, seed, threads);
    }
    return to_python(to_json(s));
  }, py::arg("samples"), py::arg("seed") = 1, py::arg("threads") = 1);
  m.def("criterion_name", &criterion_name);
  m.def("run_criterion", [](int id, uint64_t samples, uint64_t seed) {
    VerifyOptions opt;
    opt.seed = seed;
    opt.support_samples = samples;
    opt.coverage_samples = std::min<uint64_t>(samples, opt.coverage_samples);
    CriterionResult r;
    {
      py::gil_scoped_release release;
      r = run_criterion(id, opt);
    }
    return to_python(to_json(r));
  }, py::arg("id"), py::arg("samples") = VerifyOptions{}.support_samples, py::arg("seed") = VerifyOptions{}.seed);
  m.def("train_toy", [](const py::object& config, bool control) {
    const ToyConfig cfg = toy_config_from_json(config.is_none() ? nlohmann::json::object() : from_python(config));
    nlohmann::json log = nlohmann::json::array();
    ToyResult r;
    std::optional<ControlResult> c;
    {
      py::gil_scoped_release release;
      r = run_toy_training(cfg, [&](const StepRecord& s) { log.push_back(to_json(s, cfg)); });
      if (control) c = run_dense_control(cfg);
    }
    nlohmann::json out{{"config", to_json(cfg)},
                       {"log", log},
                       {"initial_loss", r.initial_loss},
                       {"final_loss", r.final_loss},
                       {"dense_params", r.dense_params},
                       {"table_params", r.table_params},
                       {"utilisation", to_json(r.utilisation)}};
    if (c) out["control"] = {{"initial_loss", c->initial_loss}, {"final_loss", c->final_loss}, {"hidden", c->hidden}, {"params", c->params}};
    return to_python(out);
  }, py::arg("config") = py::none(), py::arg("control") = false);
}
