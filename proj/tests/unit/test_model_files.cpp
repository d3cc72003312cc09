// Artifacts shared with the trainer: the model file and the table dump.
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ttc/error.hpp"
#include "ttc/ltt.hpp"
#include "ttc/synth.hpp"

using namespace ttc;

namespace {

const std::string kModels = std::string(TTC_SOURCE_DIR) + "/models";

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(ModelFiles, FixturesParse) {
  for (const auto& entry : std::filesystem::directory_iterator(kModels)) {
    if (entry.path().extension() != ".json") continue;
    const ModelSpec m = load_model(entry.path());
    EXPECT_NO_THROW(validate_model(m)) << entry.path();
    EXPECT_EQ(parse_model(serialize_model(m)), m);
  }
}

TEST(ModelFiles, SchemaTopLevelKeys) {
  const auto j = nlohmann::json::parse(serialize_model(synth_model("cancer", 1)));
  for (const char* key : {"input_shape", "front_end", "heads", "linear", "metadata"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  // [out][in / groups][kh][kw] nesting for 1-D layers too.
  const auto& w = j["heads"][0]["layer1"]["weights"];
  EXPECT_EQ(w.size(), 16u);
  EXPECT_EQ(w[0].size(), 1u);
  EXPECT_EQ(w[0][0].size(), 5u);
  EXPECT_EQ(w[0][0][0].size(), 1u);
}

TEST(ModelFiles, DumpFormat) {
  const ModelSpec m = load_model(kModels + "/toy_xor.json");
  EXPECT_EQ(format_table_dump(m), "1 0 2 0001\n");
  const ModelSpec adult = synth_model("adult", 2);
  const auto lines = lines_of(format_table_dump(adult));
  ASSERT_EQ(lines.size(), 70u);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    int h = -1, ch = -1, n = -1;
    std::string bits;
    in >> h >> ch >> n >> bits;
    EXPECT_EQ(h, 0);
    EXPECT_EQ(ch, static_cast<int>(i));
    EXPECT_EQ(n, 5);
    EXPECT_EQ(bits.size(), 32u);
    EXPECT_EQ(bits.find_first_not_of("01"), std::string::npos);
    EXPECT_EQ(TruthTable::from_bitstring(bits), extract_truth_table(adult.heads[0].block(), ch));
  }
}

TEST(ModelFiles, DumpCheck) {
  const ModelSpec m = synth_model("cancer", 3);
  const std::string dump = format_table_dump(m);
  EXPECT_TRUE(check_table_dump(m, dump).ok);
  EXPECT_TRUE(check_table_dump(m, dump + "\n\n").ok);

  auto lines = lines_of(dump);
  std::string flipped;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string l = lines[i];
    if (i == 2) l.back() = l.back() == '0' ? '1' : '0';
    flipped += l + "\n";
  }
  const DumpCheck bad = check_table_dump(m, flipped);
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.first_mismatch, 2);
  EXPECT_NE(bad.message.find("index 31"), std::string::npos);

  const DumpCheck short_n = check_table_dump(m, "0 0 4 0101010101010101\n");
  EXPECT_FALSE(short_n.ok);
  EXPECT_EQ(short_n.first_mismatch, 0);
  EXPECT_NE(short_n.message.find("n = 5"), std::string::npos);

  EXPECT_FALSE(check_table_dump(m, lines[0] + "\n").ok);
  EXPECT_FALSE(check_table_dump(m, dump + "0 9 5 0\n").ok);
}
