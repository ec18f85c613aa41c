#include <catch2/catch.hpp>

#include <string>

#include "support.hpp"
#include "tinr/checkpoint.hpp"
#include "tinr/train.hpp"

using namespace tinr;

namespace {

Checkpoint with_model(AnyModel model, ModelKind kind) {
  Checkpoint c{RunConfig{}, {}, std::move(model), {}, {0.5, 0.25, 0.125}, 3, {}, {}};
  c.config.kind = kind;
  c.config.seed = 17;
  c.domain = FieldDomain{{0.0, 5000.0}, {0.0, 300.0}, {0.06, 0.0599}};
  return c;
}

std::vector<Checkpoint> one_of_each() {
  std::vector<Checkpoint> out;
  Rng rng(1);

  InrModel inr{sample_bank(2, 8, {1, 10}, 1), init_inr({16, 8, 8, 1}, 30.0, 2)};
  Checkpoint a = with_model(inr, ModelKind::kInr);
  AdamState st;
  fit(std::get<InrModel>(a.model), to_pairs(GridField(testing::random_tensor({4, 3}, rng), {0, 1, 2, 3}, {0, 1, 2})),
      FitConfig{2, AdamConfig{}}, st);
  a.optimizer = st;
  out.push_back(std::move(a));

  out.push_back(with_model(InrModel{std::nullopt, init_relu_mlp({2, 6, 1}, 3)}, ModelKind::kInr));
  out.push_back(with_model(init_factorized({6}, 3, 2, 30.0, 8, {1, 10}, true, 4, 5, 6), ModelKind::kFactorized));

  MetaConfig meta;
  meta.inner_rate = 0.07;
  GinrState g = init_ginr(sample_bank(2, 8, {1}, 7), {8, 8}, 1, 30.0, 5, meta, 8, 9);
  g.codes[3] = LatentCode{testing::random_tensor({5}, rng), 3};
  g.codes[11] = LatentCode{testing::random_tensor({5}, rng), 11};
  g.outer_steps_done = 4;
  out.push_back(with_model(std::move(g), ModelKind::kGinr));

  MfModel mf{testing::random_tensor({4, 2}, rng), testing::random_tensor({3, 2}, rng), 2, 1e-3};
  Checkpoint m = with_model(std::move(mf), ModelKind::kMf);
  m.grid_x = {0, 1, 2, 3};
  m.grid_t = {0, 0.5, 1};
  out.push_back(std::move(m));
  return out;
}

}  // namespace

TEST_CASE("checkpoints round-trip bitwise for every kind", "[checkpoint]") {
  const auto dir = testing::scratch_dir("ckpt_roundtrip");
  for (const Checkpoint& c : one_of_each()) {
    INFO(model_kind_name(c.kind()));
    const auto path = dir / "c.ckpt";
    save_checkpoint(c, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.kind() == c.kind());
    CHECK(back.domain == c.domain);
    CHECK(back.loss_tail == c.loss_tail);
    CHECK(back.steps_done == c.steps_done);
    CHECK(encode_checkpoint(to_checkpoint_file(back)) == encode_checkpoint(to_checkpoint_file(c)));
    CHECK(testing::read_file(path) == encode_checkpoint(to_checkpoint_file(c)));
  }
}

TEST_CASE("loaded models evaluate identically", "[checkpoint]") {
  const auto dir = testing::scratch_dir("ckpt_eval");
  const auto all = one_of_each();
  Rng rng(4);
  const Tensor coords = testing::random_tensor({10, 2}, rng, 0.5);
  save_checkpoint(all[0], dir / "a.ckpt");
  CHECK(bitwise_equal(std::get<InrModel>(load_checkpoint(dir / "a.ckpt").model).evaluate(coords),
                      std::get<InrModel>(all[0].model).evaluate(coords)));
  save_checkpoint(all[2], dir / "f.ckpt");
  CHECK(bitwise_equal(std::get<FactorizedModel>(load_checkpoint(dir / "f.ckpt").model).evaluate(coords),
                      std::get<FactorizedModel>(all[2].model).evaluate(coords)));
  save_checkpoint(all[3], dir / "g.ckpt");
  const Checkpoint g = load_checkpoint(dir / "g.ckpt");
  const GinrState& gs = std::get<GinrState>(g.model);
  CHECK(gs.codes.size() == 2);
  CHECK(gs.meta.inner_rate == 0.07);
  CHECK(bitwise_equal(ModulatedField{&gs, gs.codes.at(11).phi}.evaluate(coords),
                      ModulatedField{&std::get<GinrState>(all[3].model), gs.codes.at(11).phi}.evaluate(coords)));
}

TEST_CASE("version mismatch names both versions", "[checkpoint]") {
  std::string bytes = encode_checkpoint(to_checkpoint_file(one_of_each()[0]));
  const auto pos = bytes.find("format-version 1");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 16, "format-version 7");
  try {
    decode_checkpoint(bytes);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("7") != std::string::npos);
    CHECK(msg.find("version 1") != std::string::npos);
  }
}

TEST_CASE("damaged checkpoints are rejected", "[checkpoint]") {
  const std::string bytes = encode_checkpoint(to_checkpoint_file(one_of_each()[3]));
  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 30, bytes.size() / 2, std::size_t{40}}) {
    try {
      decode_checkpoint(std::string_view(bytes).substr(0, cut), "ck");
      FAIL("truncated checkpoint decoded");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("corrupt") != std::string::npos);
    }
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(decode_checkpoint(flipped), FormatError);
  CHECK_THROWS_AS(decode_checkpoint("hello world"), FormatError);

  const auto dir = testing::scratch_dir("ckpt_damaged");
  testing::write_file(dir / "t.ckpt", bytes.substr(0, bytes.size() - 100));
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), FormatError);
}

TEST_CASE("tensor records are little-endian binary64", "[checkpoint]") {
  CheckpointFile f;
  f.kind = "inr";
  f.meta = Json::object();
  f.tensors.emplace_back("x", Tensor::vector({1.0}));
  const std::string bytes = encode_checkpoint(f);
  const auto pos = bytes.find(std::string("\x01\x00\x00\x00x", 5));
  REQUIRE(pos != std::string::npos);
  // name, rank 1, dim 1, then 1.0 = 0x3FF0000000000000
  const std::string value = bytes.substr(pos + 5 + 4 + 8, 8);
  CHECK(value == std::string("\x00\x00\x00\x00\x00\x00\xF0\x3F", 8));
  const CheckpointFile back = decode_checkpoint(bytes);
  REQUIRE(back.tensors.size() == 1);
  CHECK(back.tensors[0].second[0] == 1.0);
}

TEST_CASE("config parsing", "[config]") {
  const RunConfig c = parse_config_text(R"({
    "kind": "factorized", "seed": 9,
    "encoding": {"width": 32, "scales": [1, 5]},
    "network": {"hidden": [16, 16], "omega0": 20},
    "factorized": {"d_x": 4, "d_t": 6},
    "train": {"steps": 10, "lr": 0.001},
    "mask": {"pattern": "sensor-subset", "density": 0.25},
    "synth": {"cells": 20, "steps": 30, "initial": {"kind": "riemann", "left": 0.1, "right": 0.9}}
  })");
  CHECK(c.kind == ModelKind::kFactorized);
  CHECK(c.seed == 9);
  CHECK(c.encoding.scales == std::vector<double>{1, 5});
  CHECK(c.network.hidden == std::vector<std::size_t>{16, 16});
  CHECK(c.factorized.d_t == 6);
  CHECK(c.train.adam.lr == 0.001);
  CHECK(c.mask.enabled);
  CHECK(c.mask.pattern == MaskPattern::kSensorSubset);
  CHECK(c.synth.lwr.cells == 20);
  CHECK(c.synth.lwr.initial.kind == InitialProfile::Kind::kRiemann);

  // The snapshot parses back to the same snapshot.
  CHECK(to_json(parse_config(to_json(c))) == to_json(c));
  CHECK(to_json(parse_config(to_json(RunConfig{}))) == to_json(RunConfig{}));
}

TEST_CASE("config errors", "[config]") {
  auto rejects = [](const std::string& text, const std::string& needle) {
    try {
      validate(parse_config_text(text));
      FAIL("accepted: " << text);
    } catch (const ConfigError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  rejects(R"({"kind": "inr", "sed": 1})", "sed");
  rejects(R"({"network": {"omega": 30}})", "network.omega");
  rejects(R"({"kind": "tree"})", "tree");
  rejects(R"({"seed": "one"})", "seed");
  rejects(R"({"encoding": {"width": 33}})", "width");
  rejects(R"({"encoding": {"scales": []}})", "scale");
  rejects(R"({"mf": {"rank": 0}})", "rank");
  rejects(R"({"synth": {"initial": {"left": 2}}})", "fraction");
  rejects(R"({"seed": 1,)", "");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
