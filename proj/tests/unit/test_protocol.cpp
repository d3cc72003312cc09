#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "json.hpp"
#include "oracle.hpp"
#include "ttc/engine.hpp"
#include "ttc/error.hpp"
#include "ttc/protocol.hpp"
#include "ttc/synth.hpp"

using namespace ttc;

namespace {

InferenceRequest sample_request() {
  return {"adult", Setting::FullPr, {1, 0, 1, 1, 0, 0, 0, 1, 1}, 42};
}

InferenceResponse sample_response() {
  InferenceResponse r;
  r.nonce = 7;
  r.model_id = "m";
  r.model_version = "00ff";
  r.partials = {{1, 2}, {3, 4}, {0, 0}, {5, -1}};
  r.trace.lut_calls_by_bitwidth = {{5, 280}};
  r.trace.max_bitwidth = 5;
  r.trace.max_accumulator = 12;
  return r;
}

ModelRegistry registry_with(const std::string& id, const Circuit& c) {
  ModelRegistry reg;
  reg.add(id, c);
  return reg;
}

}  // namespace

TEST(Protocol, FrameRoundTrip) {
  const std::vector<Message> msgs = {sample_request(), sample_response(),
                                     ErrorMessage{9, "ShapeError", "bad"}};
  for (const Message& m : msgs) {
    const auto bytes = frame_encode(m);
    ASSERT_GE(bytes.size(), kFrameHeaderSize);
    const std::uint32_t len = (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                              (std::uint32_t{bytes[2]} << 8) | bytes[3];
    EXPECT_EQ(len + kFrameHeaderSize, bytes.size());
    EXPECT_EQ(bytes[4], m.index() + 1);
    EXPECT_EQ(frame_decode(bytes), m);
  }
}

TEST(Protocol, FrameErrors) {
  auto bytes = frame_encode(sample_request());
  EXPECT_THROW(frame_decode(std::span(bytes).first(3)), FrameError);
  EXPECT_THROW(frame_decode(std::span(bytes).first(bytes.size() - 1)), FrameError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(frame_decode(extra), FrameError);
  auto bad_type = bytes;
  bad_type[4] = 9;
  EXPECT_THROW(frame_decode(bad_type), FrameError);
  auto bad_body = bytes;
  bad_body[5] = 'x';
  EXPECT_THROW(frame_decode(bad_body), FrameError);
}

TEST(Protocol, ReaderHandlesSplitsAndBatches) {
  std::vector<std::uint8_t> stream;
  std::vector<Message> sent;
  for (int i = 0; i < 5; ++i) {
    InferenceRequest r = sample_request();
    r.nonce = i;
    sent.push_back(r);
    const auto f = frame_encode(r);
    stream.insert(stream.end(), f.begin(), f.end());
  }
  std::mt19937_64 rng(1);
  FrameReader reader;
  std::vector<Message> got;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t step = std::min<std::size_t>(1 + rng() % 40, stream.size() - pos);
    reader.feed(std::span(stream).subspan(pos, step));
    pos += step;
    while (auto m = reader.next()) got.push_back(*m);
  }
  EXPECT_EQ(got, sent);
  EXPECT_EQ(reader.buffered(), 0u);
}

TEST(Protocol, RequestBodyLayout) {
  const auto body = nlohmann::json::parse(message_body(sample_request()));
  EXPECT_EQ(body["model_id"], "adult");
  EXPECT_EQ(body["setting"], "full");
  EXPECT_EQ(body["bits"], 9);
  EXPECT_EQ(body["nonce"], 42);
  EXPECT_EQ(body["payload"], "jQE=");  // 0b10001101, 0b00000001
}

TEST(Protocol, ResponseCarriesNoScale) {
  const Circuit c = compile(synth_model("adult", 1));
  const ModelRegistry reg = registry_with("adult", c);
  const ClientManifest man = manifest_of(c, "adult");
  std::mt19937_64 rng(2);
  const auto x = oracle::random_bits(rng, 18);
  const auto resp = server_infer(reg, client_encode_bits(x, man, Setting::FullPr, 1));
  const std::string body = message_body(resp);
  EXPECT_EQ(body.find("scale"), std::string::npos);
  const auto j = nlohmann::json::parse(body);
  EXPECT_FALSE(j.contains("scores"));
  EXPECT_EQ(j["partials"].size(), 4u);
}

TEST(Protocol, InProcessEndToEnd) {
  std::mt19937_64 rng(3);
  for (const std::string arch : {"adult", "cancer", "diabetes", "mnist_vgg1b_tt"}) {
    const Circuit c = compile(synth_model(arch, 9));
    const ModelRegistry reg = registry_with(arch, c);
    const ClientManifest man = manifest_of(c, arch);
    const Setting s = c.front_end.kind == FrontEnd::Kind::Binarize ? Setting::FullPr
                                                                    : Setting::SplitFeatures;
    for (int r = 0; r < 10; ++r) {
      const auto x = oracle::random_bits(rng, c.input_bits());
      const Message m = server_handle(reg, frame_decode(frame_encode(client_encode_bits(x, man, s, r))));
      const auto resp = std::get<InferenceResponse>(frame_decode(frame_encode(m)));
      EXPECT_EQ(resp.nonce, static_cast<std::uint64_t>(r));
      EXPECT_EQ(resp.model_version, circuit_version(c));
      const ClientResult got = client_finalize(resp, man);
      const InferenceResult want = eval_cleartext(c, x);
      EXPECT_EQ(got.int_scores, want.int_scores);
      EXPECT_EQ(got.label, want.label);
      EXPECT_EQ(got.scores, want.scores);
    }
  }
}

TEST(Protocol, ClientEncodeBinarizes) {
  const Circuit c = compile(synth_model("adult", 1));
  ClientManifest man = manifest_of(c, "adult");
  std::vector<double> x(18, 0.2);
  x[4] = 0.5;
  x[7] = 0.9;
  const InferenceRequest r = client_encode(x, man, Setting::FullPr, 5);
  for (int i = 0; i < 18; ++i) EXPECT_EQ(r.payload[i], (i == 4 || i == 7) ? 1 : 0);
}

TEST(Protocol, ErrorsComeBackAsMessages) {
  const Circuit c = compile(synth_model("adult", 1));
  const ModelRegistry reg = registry_with("adult", c);
  auto kind = [&](const InferenceRequest& r) {
    const Message m = server_handle(reg, r);
    const auto* e = std::get_if<ErrorMessage>(&m);
    EXPECT_TRUE(e != nullptr);
    if (e) {
      EXPECT_EQ(e->nonce, r.nonce);
    }
    return e ? e->kind : std::string();
  };
  InferenceRequest r{"nope", Setting::FullPr, std::vector<std::uint8_t>(18, 0), 3};
  EXPECT_EQ(kind(r), "UnknownModel");
  r.model_id = "adult";
  r.payload.resize(17);
  EXPECT_EQ(kind(r), "ShapeError");
  r.payload.resize(18);
  r.setting = Setting::SplitFeatures;
  EXPECT_EQ(kind(r), "ShapeError");
  EXPECT_THROW(server_infer(reg, r), ShapeError);
  const Message wrong = server_handle(reg, sample_response());
  EXPECT_EQ(std::get<ErrorMessage>(wrong).kind, "FrameError");
}

TEST(Protocol, SplitModelsRejectFullSetting) {
  const Circuit c = compile(synth_model("mnist_vgg1b_tt", 1));
  const ClientManifest man = manifest_of(c, "v");
  const std::vector<std::uint8_t> x(c.input_bits(), 0);
  EXPECT_THROW(client_encode_bits(x, man, Setting::FullPr, 1), ShapeError);
  EXPECT_NO_THROW(client_encode_bits(x, man, Setting::SplitFeatures, 1));
}

TEST(Protocol, FinalizeChecksShape) {
  InferenceResponse r = sample_response();
  ClientManifest man;
  man.classes = 3;
  EXPECT_THROW(client_finalize(r, man), ShapeError);
  man.classes = 2;
  man.scale = 0.5;
  const ClientResult res = client_finalize(r, man);
  EXPECT_EQ(res.int_scores, (std::vector<std::int64_t>{1 + 6 - 40, 2 + 8 + 8}));
  EXPECT_EQ(res.label, 1);
}

TEST(Protocol, RegistryLoadsDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "ttc_test_registry";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  save_model(synth_model("cancer", 1), dir / "cancer.json");
  save_circuit(compile(synth_model("adult", 1)), dir / "adult.json");
  const ModelRegistry reg = ModelRegistry::load_dir(dir);
  EXPECT_EQ(reg.ids(), (std::vector<std::string>{"adult", "cancer"}));
  EXPECT_EQ(reg.find("cancer")->input_bits(), 81);
  EXPECT_EQ(reg.find("x"), nullptr);
  EXPECT_THROW(reg.version("x"), UnknownModel);
  std::filesystem::remove_all(dir);
}

TEST(Protocol, SettingNames) {
  EXPECT_EQ(parse_setting("full"), Setting::FullPr);
  EXPECT_EQ(parse_setting("split"), Setting::SplitFeatures);
  EXPECT_THROW(parse_setting("other"), SchemaError);
}
