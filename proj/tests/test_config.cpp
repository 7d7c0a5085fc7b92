// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The fibereq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cstdlib>

#include "fibereq/config.hpp"

using namespace fibereq;

TEST_CASE("defaults describe the reference link and desk budget") {
  const ExperimentConfig c;
  CHECK(c.link.n_spans == 17);
  CHECK(c.link.span_km == 70.0);
  CHECK(c.powers_dbm.size() == 9);
  CHECK(c.powers_dbm.front() == -4.0);
  CHECK(c.powers_dbm.back() == 4.0);
  CHECK(c.split.train == (std::size_t{1} << 17));
  CHECK(c.split.validation == (std::size_t{1} << 15));
  CHECK(c.training.train.max_epochs <= 2000);
  CHECK(c.dims.n_out() == 61);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("parse of serialize is the identity") {
  ExperimentConfig c;
  c.link.n_spans = 3;
  c.powers_dbm = {-1.5, 0.25, 2};
  c.architectures = {nn::Architecture::DeepCnn};
  c.dims.hidden = 7;
  c.training.train.learning_rate = 3.3e-4;
  c.sweep.lut_bits = {2, 9};
  c.sweep.search_taylor_boundary = false;
  c.seeds.bits = 1234567890123ull;
  c.noise.sigma_0dbm = 0.0123;
  c.output_dir = "somewhere/else";
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.powers_dbm == c.powers_dbm);
  CHECK(back.seeds.bits == c.seeds.bits);
  CHECK(back.sweep.search_taylor_boundary == false);
  CHECK(back.architectures.size() == 1);
  CHECK(parse_config(serialize_config(back)).link.n_spans == 3);
}

TEST_CASE("empty text yields the defaults; partial text overrides") {
  CHECK(serialize_config(parse_config("")) == serialize_config(ExperimentConfig{}));
  const ExperimentConfig c = parse_config("[link]\nn_spans = 2\n# comment\n[train]\nmax_epochs = 7\n");
  CHECK(c.link.n_spans == 2);
  CHECK(c.training.train.max_epochs == 7);
}

TEST_CASE("unknown sections, unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(parse_config("[bogus]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[link]\nspan_length = 70\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[link]\nn_spans = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[link]\nn_spans = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), IoError);
}

TEST_CASE("validation catches inconsistent values") {
  ExperimentConfig c;
  c.signal.cdc_taps = 516;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.powers_dbm.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.frac_bits = 40;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.split.train = std::size_t{1} << 20;  // more than 2^18 symbols in total
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("environment overrides only touch paths and threads") {
  ExperimentConfig c;
  ::setenv("FIBEREQ_OUTPUT_DIR", "/tmp/elsewhere", 1);
  ::setenv("FIBEREQ_THREADS", "3", 1);
  apply_env_overrides(c);
  CHECK(c.output_dir == "/tmp/elsewhere");
  CHECK(c.threads == 3);
  ::setenv("FIBEREQ_THREADS", "0", 1);
  CHECK_THROWS_AS(apply_env_overrides(c), ConfigError);
  ::unsetenv("FIBEREQ_OUTPUT_DIR");
  ::unsetenv("FIBEREQ_THREADS");
}

TEST_CASE("stage hashes change only with the inputs of that stage") {
  const ExperimentConfig a;
  ExperimentConfig b = a;
  b.sweep.retrain_epochs = 10;
  CHECK(config_hash(a, Stage::Data) == config_hash(b, Stage::Data));
  CHECK(config_hash(a, Stage::Train) == config_hash(b, Stage::Train));
  CHECK(config_hash(a, Stage::Sweep) != config_hash(b, Stage::Sweep));
  b = a;
  b.link.n_spans = 16;
  CHECK(config_hash(a, Stage::Data) != config_hash(b, Stage::Data));
  CHECK(config_hash(a, Stage::Train) != config_hash(b, Stage::Train));
  b = a;
  b.output_dir = "x";
  b.threads = 4;
  for (Stage s : {Stage::Data, Stage::Baselines, Stage::Train, Stage::Sweep, Stage::Quantize}) {
    CHECK(config_hash(a, s) == config_hash(b, s));
  }
}

TEST_CASE("DBP scaling grid") {
  DbpSettings d;
  const auto g = d.xi_grid();
  REQUIRE(g.size() == 16);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(1.5));
}
