#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

class Cli : public ::testing::Test {
 protected:
  static inline fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("sforge_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    write_corpus();
    spit(dir / "base.cfg",
         "seed = 7\n"
         "paths.corpus = corpus.tsv\n"
         "paths.unlabeled = unlabeled.txt\n"
         "paths.embeddings = vec.txt\n"
         "paths.checkpoint = model.ck\n"
         "paths.report = report.txt\n"
         "embed.dim = 8\n"
         "embed.epochs = 2\n"
         "embed.min_count = 1\n"
         "model.name = lstm\n"
         "model.embedding_dim = 8\n"
         "model.hidden = 4\n"
         "model.dense = 4\n"
         "model.max_len = 12\n"
         "epochs = 3\n"
         "eval.k = 2\n");
    auto r = run("embed -c base.cfg");
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("train -c base.cfg");
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static void TearDownTestSuite() { fs::remove_all(dir); }

  // Sinhala toy corpus: two class words per comment plus filler.
  static void write_corpus() {
    const std::vector<std::string> marks{"නරක", "සාමාන්‍ය", "හොඳ", "මිශ්‍ර"};
    const std::vector<std::string> labels{"NEGATIVE", "NEUTRAL", "POSITIVE", "CONFLICT"};
    const std::vector<std::string> fill{"අද", "මම", "ගෙදර", "ගියා", "ඔහු", "පොත", "කියවයි", "ලස්සන", "දවසක්", "රට"};
    std::mt19937 rng(1);
    std::ostringstream labeled, plain;
    for (int i = 0; i < 40; ++i) {
      const int c = i % 4;
      std::vector<std::string> w(4 + rng() % 4);
      for (auto& t : w) t = fill[rng() % fill.size()];
      w[rng() % w.size()] = marks[c];
      w[rng() % w.size()] = marks[c];
      std::string line;
      for (const auto& t : w) line += (line.empty() ? "" : " ") + t;
      line += "!";
      labeled << labels[c] << '\t' << line << '\n';
      plain << line << '\n';
    }
    spit(dir / "corpus.tsv", labeled.str());
    spit(dir / "unlabeled.txt", plain.str());
  }

  static Outcome run(const std::string& args) {
    static int counter = 0;
    const auto out = dir / ("stdout." + std::to_string(counter));
    const auto err = dir / ("stderr." + std::to_string(counter++));
    const std::string cmd = "cd " + quote(dir.string()) + " && " + quote(SFORGE_CLI) + " " + args + " >" +
                            quote(out.string()) + " 2>" + quote(err.string());
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string value_of(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind(key + " = ", 0) == 0) return line.substr(key.size() + 3);
    }
    return {};
  }
};

TEST_F(Cli, DescribeAcceptsEveryModelName) {
  for (const char* name : {"rnn", "lstm", "gru", "bilstm", "cnn-gru", "cnn-lstm", "cnn-bilstm", "stacked-lstm-2",
                           "stacked-lstm-3", "stacked-bilstm-2", "stacked-bilstm-3", "hahnn", "capsule-a",
                           "capsule-b"}) {
    auto r = run(std::string("describe --model ") + name + " --vocab 50");
    EXPECT_EQ(r.code, 0) << name << ": " << r.err;
    EXPECT_NE(r.out.find("total_parameters"), std::string::npos) << name;
  }
  auto r = run("describe --model transformer");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("transformer"), std::string::npos);
}

TEST_F(Cli, EmbeddingDimMustMatchModel) {
  auto r = run("embed -c base.cfg -s embed.dim=300 -s paths.embeddings=vec300.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "vec300.txt").substr(0, 7), "14 300\n");
  r = run("train -c base.cfg -s paths.embeddings=vec300.txt -s model.embedding_dim=300 -s epochs=1 "
          "-s paths.checkpoint=m300.ck -s paths.report=r300.txt");
  EXPECT_EQ(r.code, 0) << r.err;

  r = run("embed -c base.cfg -s embed.dim=200 -s paths.embeddings=vec200.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("train -c base.cfg -s paths.embeddings=vec200.txt -s model.embedding_dim=300 "
          "-s paths.checkpoint=m200.ck -s paths.report=r200.txt");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("200"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "m200.ck"));
}

TEST_F(Cli, PreprocessManifest) {
  auto r = run("preprocess --in corpus.tsv --out prep.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("[manifest]"), std::string::npos);
  EXPECT_EQ(value_of(r.out, "total"), "40");
  for (const char* l : {"NEGATIVE", "NEUTRAL", "POSITIVE", "CONFLICT"}) {
    EXPECT_EQ(value_of(r.out, std::string("count.") + l), "10");
  }
  EXPECT_EQ(value_of(r.out, "docs_out"), "40");
  const auto prep = slurp(dir / "prep.txt");
  EXPECT_EQ(prep.find('!'), std::string::npos);
}

TEST_F(Cli, PreprocessRejectsBadInput) {
  spit(dir / "badlabel.tsv", "NEGATIVE\tහොඳ\nANGRY\tනරක\n");
  auto r = run("preprocess --in badlabel.tsv --out x.txt");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("badlabel.tsv:2"), std::string::npos) << r.err;

  spit(dir / "empty.tsv", "");
  r = run("preprocess --in empty.tsv --out x.txt");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST_F(Cli, Kappa) {
  spit(dir / "a.txt", "NEGATIVE\nNEGATIVE\nPOSITIVE\nPOSITIVE\n");
  spit(dir / "b.txt", "NEGATIVE\nPOSITIVE\nPOSITIVE\nPOSITIVE\n");
  spit(dir / "c.txt", "NEGATIVE\nPOSITIVE\nPOSITIVE\n");
  auto r = run("kappa a.txt a.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "kappa"), "1.0000");
  r = run("kappa a.txt b.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "kappa"), "0.5000");
  EXPECT_EQ(value_of(r.out, "observed_agreement"), "0.7500");
  r = run("kappa a.txt c.txt");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("4"), std::string::npos);
  EXPECT_NE(r.err.find("3"), std::string::npos);
}

TEST_F(Cli, PredictIsNormalizedAndRepeatable) {
  const std::string args = "predict --checkpoint model.ck 'අද හොඳ දවසක්!' 'මම නරක පොත කියවයි'";
  auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  int labels = 0;
  double sum = 0;
  std::vector<double> sums;
  while (std::getline(in, line)) {
    if (line.rfind("label = ", 0) == 0) {
      const auto l = line.substr(8);
      EXPECT_TRUE(l == "NEGATIVE" || l == "NEUTRAL" || l == "POSITIVE" || l == "CONFLICT") << l;
      if (labels++) sums.push_back(sum);
      sum = 0;
    } else if (line.rfind("score.", 0) == 0) {
      sum += std::stod(line.substr(line.find('=') + 1));
    }
  }
  sums.push_back(sum);
  EXPECT_EQ(labels, 2);
  for (double s : sums) EXPECT_NEAR(s, 1.0, 1e-5);
  EXPECT_EQ(run(args).out, r.out);

  r = run("predict --checkpoint model.ck '!!! ...'");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST_F(Cli, EvalPredictionsReferenceAccuracy) {
  const char* names[] = {"NEGATIVE", "NEUTRAL", "POSITIVE", "CONFLICT"};
  const int counts[4][4] = {{1407, 56, 41, 29}, {344, 110, 35, 16}, {162, 30, 367, 31}, {272, 15, 50, 47}};
  std::ostringstream preds;
  for (int a = 0; a < 4; ++a) {
    for (int p = 0; p < 4; ++p) {
      for (int n = 0; n < counts[a][p]; ++n) preds << names[a] << '\t' << names[p] << '\n';
    }
  }
  spit(dir / "preds.tsv", preds.str());
  auto r = run("eval --predictions preds.tsv --report t4.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = slurp(dir / "t4.txt");
  EXPECT_EQ(value_of(report, "accuracy"), "0.6411");
  EXPECT_EQ(value_of(report, "support.NEGATIVE"), "1533.0000");
}

TEST_F(Cli, EvalCheckpointOnLabeledData) {
  auto r = run("eval --checkpoint model.ck --data corpus.tsv --report ev.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = slurp(dir / "ev.txt");
  EXPECT_FALSE(value_of(report, "accuracy").empty());
  EXPECT_EQ(value_of(report, "support.CONFLICT"), "10.0000");
}

TEST_F(Cli, CrossValidationIsBitExactOnRerun) {
  auto r = run("cv -c base.cfg -s paths.report=cv1.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("cv -c base.cfg -s paths.report=cv2.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = slurp(dir / "cv1.txt");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "cv2.txt"));
  r = run("cv -c base.cfg -s paths.report=cv3.txt -s seed=8");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(a, slurp(dir / "cv3.txt"));
}

TEST_F(Cli, SweepWritesOneFilePerDimension) {
  auto r = run("embed -c base.cfg -s embed.sweep=50,300 -s embed.sweep_modes=word2vec -s paths.embeddings=sw.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* d : {"50", "300"}) {
    const auto p = dir / (std::string("sw.txt.word2vec.") + d);
    ASSERT_TRUE(fs::exists(p)) << p;
    const auto text = slurp(p);
    EXPECT_EQ(text.substr(0, text.find('\n')), std::string("14 ") + d);
  }
}

TEST_F(Cli, ConfigErrors) {
  auto r = run("train -c base.cfg -s train.bogus=1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.bogus"), std::string::npos) << r.err;

  spit(dir / "bad.cfg", "seed = 1\nwhatever = 2\n");
  r = run("cv -c bad.cfg");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.cfg:2"), std::string::npos) << r.err;

  r = run("train -c base.cfg -s eval.k=1");
  EXPECT_EQ(r.code, 2);
  r = run("train -c base.cfg -s model.conv.filters=3");
  EXPECT_EQ(r.code, 2);
  r = run("train -c base.cfg -s paths.corpus=missing.tsv");
  EXPECT_EQ(r.code, 3);
}

}  // namespace
