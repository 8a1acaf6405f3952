// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python extension. Configs, summaries and comparisons cross the boundary as
// JSON text; the package wrapper turns them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <string>
#include <vector>

#include "growprune/checkpoint.hpp"
#include "growprune/data.hpp"
#include "growprune/errors.hpp"
#include "growprune/experiment.hpp"
#include "growprune/metrics.hpp"
#include "growprune/model.hpp"
#include "growprune/sparsity.hpp"

namespace py = pybind11;
namespace gp = growprune;
using nlohmann::json;

namespace {

json parse(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw gp::ConfigError("config is not valid JSON");
    return j;
}

std::vector<std::string> run_config(const std::string& config, const std::vector<std::string>& overrides) {
    gp::RunConfig c = gp::resolve_config(parse(config), overrides);
    std::vector<std::string> out;
    {
        py::gil_scoped_release release;
        for (const auto& r : gp::execute(c)) out.push_back(r.dir.string());
    }
    return out;
}

py::array_t<float> predict(const std::filesystem::path& checkpoint,
                           py::array_t<float, py::array::c_style | py::array::forcecast> continuous,
                           py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast> categorical) {
    const gp::ModelState m = gp::load_checkpoint(checkpoint);
    const auto& c = m.config;
    if (continuous.ndim() != 2 || categorical.ndim() != 2 || continuous.shape(0) != categorical.shape(0) ||
        static_cast<std::size_t>(continuous.shape(1)) != c.num_continuous ||
        static_cast<std::size_t>(categorical.shape(1)) != c.num_categorical) {
        throw gp::ShapeError("expected continuous [n, " + std::to_string(c.num_continuous) + "] and categorical [n, " +
                             std::to_string(c.num_categorical) + "]");
    }
    const auto n = static_cast<std::size_t>(continuous.shape(0));
    gp::MiniBatch b;
    b.num_continuous = c.num_continuous;
    b.num_categorical = c.num_categorical;
    b.labels.assign(n, 0.0f);
    b.continuous.assign(continuous.data(), continuous.data() + n * c.num_continuous);
    b.categorical.assign(categorical.data(), categorical.data() + n * c.num_categorical);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < c.num_categorical; ++k) {
            if (b.categorical[i * c.num_categorical + k] >= c.table_sizes[k]) {
                throw gp::ShapeError("categorical index out of range in column " + std::to_string(k));
            }
        }
    }
    std::vector<float> p;
    {
        py::gil_scoped_release release;
        p = gp::predict(m, b);
    }
    py::array_t<float> out(static_cast<py::ssize_t>(n));
    std::copy(p.begin(), p.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "growprune native core";

    auto base = py::register_exception<gp::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<gp::ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<gp::ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<gp::DataError>(m, "DataError", base.ptr());

    m.def(
        "resolve_config",
        [](const std::string& config, const std::vector<std::string>& overrides) {
            return json(gp::resolve_config(parse(config), overrides)).dump();
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
    m.def("preset_names", &gp::preset_names);
    m.def("run", &run_config, py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
          "Runs a config (or sweep) and returns the run directories.");
    m.def(
        "compare",
        [](const std::filesystem::path& baseline, const std::vector<std::filesystem::path>& runs) {
            return gp::compare(baseline, runs).to_json().dump();
        },
        py::arg("baseline"), py::arg("runs"));
    m.def(
        "inspect_checkpoint", [](const std::filesystem::path& p) { return gp::inspect_checkpoint(p).dump(); },
        py::arg("path"));
    m.def("predict", &predict, py::arg("checkpoint"), py::arg("continuous"), py::arg("categorical"));
    m.def("spearman", &gp::spearman, py::arg("x"), py::arg("y"));
    m.def(
        "relative_metric",
        [](double experimental, double baseline) {
            const auto r = gp::relative_metric(experimental, baseline);
            return py::make_tuple(r.percent, r.significant);
        },
        py::arg("experimental"), py::arg("baseline"));
    m.def("keep_count", &gp::keep_count, py::arg("beta"), py::arg("outputs"));
    m.def(
        "categorical_hash", [](const std::string& s) { return gp::categorical_hash(s); }, py::arg("value"));
}
