// pm: ingest corpora, serve the API, run the pipeline headless.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "pm/api.hpp"
#include "pm/codec.hpp"
#include "pm/config.hpp"
#include "pm/corpus.hpp"
#include "pm/error.hpp"
#include "pm/evaluation.hpp"
#include "pm/session.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw pm::Error(pm::ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Backends {
  std::shared_ptr<const pm::Embedder> embedder;
  std::shared_ptr<const pm::Generator> generator;
};

Backends make_backends(const pm::Settings& s) {
  pm::EmbedderConfig ec;
  if (s.embedder_url) {
    ec.kind = pm::EmbedderConfig::Kind::http;
    ec.endpoint = s.embedder_url;
  }
  pm::GeneratorConfig gc;
  gc.endpoint = s.generator_url;
  return {pm::make_embedder(ec), pm::make_generator(gc)};
}

// The bundled pair list, if it can be found next to the working directory.
std::string default_common_pairs() {
  for (const fs::path p : {fs::path("data/common_pairs.json"), fs::path(PM_DATA_DIR) / "common_pairs.json"}) {
    std::error_code ec;
    if (fs::exists(p, ec)) return read_text(p);
  }
  return "[]";
}

// A small demo corpus: prompts drawn from a few themes, mock text features,
// and a solid-colour image per record embedded with the mock image encoder.
void mock_corpus(const fs::path& out, std::size_t n, std::uint64_t seed) {
  static const std::vector<std::vector<std::string>> themes{
      {"castle", "misty", "mountain", "fantasy", "artstation", "trending on artstation", "matte painting"},
      {"cat", "cute", "fluffy", "portrait", "studio photo", "bokeh", "kitten"},
      {"city", "neon", "night", "cyberpunk", "rain", "street", "unreal engine"},
      {"forest", "river", "sunset", "watercolor", "calm", "ghibli style", "detailed"},
  };
  std::mt19937_64 rng(seed);
  pm::MockEmbedder emb;
  std::vector<pm::PromptImageRecord> recs;
  pm::FeatureMatrix text(0, 512), image(0, 512);
  fs::create_directories(out / "images");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& theme = themes[i % themes.size()];
    std::string prompt;
    const std::size_t words = 3 + rng() % 4;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) prompt += rng() % 4 == 0 ? ", " : " ";
      prompt += theme[rng() % theme.size()];
    }
    pm::PromptImageRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "db-%06zu", i);
    r.id = id;
    r.prompt = prompt;
    r.image_ref = "images/" + r.id + ".png";
    r.guidance_scale = 5.0 + static_cast<double>(rng() % 2500) / 100.0;
    r.seed = rng();
    r.row = i;
    const auto c = rng();
    const auto png = pm::encode_solid_png(8, 8, pm::Rgb{static_cast<std::uint8_t>(c), static_cast<std::uint8_t>(c >> 8),
                                                        static_cast<std::uint8_t>(c >> 16)});
    std::ofstream(out / r.image_ref, std::ios::binary).write(reinterpret_cast<const char*>(png.data()),
                                                             static_cast<std::streamsize>(png.size()));
    text.append_row(emb.embed_text(prompt));
    image.append_row(emb.embed_image(png));
    recs.push_back(std::move(r));
  }
  pm::write_corpus(pm::Corpus::build(std::move(recs), std::move(text), std::move(image)), out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prompt exploration toolkit"};
  app.require_subcommand(1);
  std::optional<std::string> config_file;
  app.add_option("--config", config_file, "key=value settings file (environment overrides it)");

  auto* ingest = app.add_subcommand("ingest", "validate a manifest plus embeddings and write an index directory");
  std::string manifest, embeddings, out;
  ingest->add_option("--manifest", manifest, "manifest.jsonl")->required();
  ingest->add_option("--embeddings", embeddings, "directory with text.pmeb and image.pmeb")->required();
  ingest->add_option("--out", out, "index directory")->required();

  auto* serve = app.add_subcommand("serve", "serve the JSON API");
  std::optional<std::string> index, static_dir, sessions_dir, pairs_file;
  int port = 8080;
  std::string host = "127.0.0.1";
  bool async = false;
  serve->add_option("--index", index, "index directory");
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--static", static_dir, "directory mounted at /");
  serve->add_option("--sessions", sessions_dir, "persist created sessions here");
  serve->add_option("--common-pairs", pairs_file, "JSON list of {a, b} keyword pairs");
  serve->add_flag("--async", async, "create sessions in the background (202 + status polling)");

  auto* recommend = app.add_subcommand("recommend", "run the pipeline once and print keywords");
  std::string prompt;
  std::size_t k = 500, top = 5, n_generate = 0;
  double gs_min = 5.0, gs_max = 30.0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> save;
  bool as_json = false;
  recommend->add_option("--index", index, "index directory");
  recommend->add_option("--prompt", prompt)->required();
  recommend->add_option("--k", k, "records to retrieve");
  recommend->add_option("--top", top, "keywords to print");
  recommend->add_option("--n-generate", n_generate);
  recommend->add_option("--gs-min", gs_min);
  recommend->add_option("--gs-max", gs_max);
  recommend->add_option("--seed", seed);
  recommend->add_option("--save", save, "write the session to this directory");
  recommend->add_flag("--json", as_json, "print the layout document");

  auto* evaluate = app.add_subcommand("evaluate", "rate a saved session against a keyword criterion");
  std::string session_dir, kw_a;
  std::optional<std::string> kw_b;
  evaluate->add_option("--session", session_dir)->required();
  evaluate->add_option("--a", kw_a)->required();
  evaluate->add_option("--b", kw_b);

  auto* mock = app.add_subcommand("mock-corpus", "write a small synthetic index with mock features");
  std::size_t mock_n = 400;
  std::uint64_t mock_seed = 1;
  mock->add_option("--out", out)->required();
  mock->add_option("--n", mock_n);
  mock->add_option("--seed", mock_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto settings = pm::load_settings(config_file ? std::optional<fs::path>(*config_file) : std::nullopt);

    if (*ingest) {
      const auto corpus = pm::ingest_manifest(manifest, embeddings);
      pm::write_corpus(corpus, out);
      std::cout << "ingested " << corpus.size() << " records into " << out << "\n";
      return 0;
    }

    if (*mock) {
      mock_corpus(out, mock_n, mock_seed);
      std::cout << "wrote " << mock_n << " records to " << out << "\n";
      return 0;
    }

    if (*evaluate) {
      const auto state = pm::load_session(session_dir);
      const auto backends = make_backends(settings);
      const auto criterion = kw_b ? pm::build_criterion(kw_a, std::string_view(*kw_b)) : pm::build_criterion(kw_a);
      std::cout << pm::evaluation_document(pm::evaluate_session(state, criterion, *backends.embedder)) << "\n";
      return 0;
    }

    std::shared_ptr<const pm::Corpus> corpus;
    if (index) corpus = std::make_shared<const pm::Corpus>(pm::load_corpus_dir(*index));
    const auto backends = make_backends(settings);

    if (*recommend) {
      pm::SessionInput in;
      in.prompt = prompt;
      in.k_retrieve = k;
      in.n_generate = n_generate;
      in.gs_min = gs_min;
      in.gs_max = gs_max;
      in.rng_seed = seed.value_or(settings.seed);
      if (!corpus && in.k_retrieve > 0) throw pm::Error(pm::ErrorCode::CorpusNotLoaded, "--index is required");
      const pm::Corpus empty;
      const auto state = pm::create_session(in, corpus ? *corpus : empty, *backends.embedder, *backends.generator);
      if (save) pm::save_session(state, *save);
      if (as_json) {
        std::cout << pm::layout_document(state, "cli") << "\n";
        return 0;
      }
      // Coarsest keywords first, then by importance within their cluster.
      auto placements = state.placements;
      std::stable_sort(placements.begin(), placements.end(),
                       [](const auto& a, const auto& b) { return a.level < b.level; });
      for (std::size_t i = 0; i < placements.size() && i < top; ++i) {
        std::cout << placements[i].term.text << "\t" << placements[i].image_ids.size() << " images\n";
      }
      return 0;
    }

    if (*serve) {
      pm::ServiceOptions o;
      o.corpus = corpus;
      if (index) o.corpus_dir = *index;
      o.embedder = backends.embedder;
      o.generator = backends.generator;
      o.default_seed = settings.seed;
      o.async_creation = async;
      o.common_pairs_json = pairs_file ? read_text(*pairs_file) : default_common_pairs();
      pm::parse_common_pairs(o.common_pairs_json);
      if (sessions_dir) o.sessions_dir = fs::path(*sessions_dir);
      pm::SessionService service(std::move(o));
      httplib::Server server;
      pm::mount_routes(server, service, static_dir ? std::optional<fs::path>(*static_dir) : std::nullopt);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const pm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
