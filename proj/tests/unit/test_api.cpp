#include <fstream>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"
#include "pm/api.hpp"
#include "pm/codec.hpp"
#include "pm/pmeb.hpp"

using namespace pm;
using json = nlohmann::json;
using pm::test::TempDir;

namespace {

std::shared_ptr<const Corpus> shared_corpus() {
  static const auto c = std::make_shared<const Corpus>(pm::test::blob_corpus(60, 11));
  return c;
}

ServiceOptions mock_options() {
  ServiceOptions o;
  o.corpus = shared_corpus();
  o.default_seed = 42;
  o.common_pairs_json = R"([{"a":"cute","b":"ugly"}])";
  return o;
}

const std::string kCreate =
    R"({"prompt":"a misty castle","gs_min":5,"gs_max":30,"n_generate":4,"k_retrieve":8,"seed":42})";

std::string create(SessionService& svc, const std::string& body = kCreate) {
  const auto r = svc.handle("POST", "/api/sessions", body);
  REQUIRE(r.status == 201);
  return json::parse(r.body)["session_id"].get<std::string>();
}

std::string error_code(const HttpResponse& r) { return json::parse(r.body)["error"]["code"].get<std::string>(); }

}  // namespace

TEST_CASE("every error code maps to one status") {
  std::set<std::string> codes;
  for (ErrorCode c : kAllErrorCodes) {
    const auto e = to_api_error(Error(c, "x"));
    CHECK(e.status >= 400);
    CHECK(e.status < 600);
    CHECK(codes.insert(e.code).second);
    CHECK(e.message == "x");
  }
  CHECK(to_api_error(Error(ErrorCode::BackendUnavailable, "")).code == "backend_unavailable");
  CHECK(to_api_error(Error(ErrorCode::BackendUnavailable, "")).status == 502);
  CHECK(to_api_error(Error(ErrorCode::InvalidRange, "")).status == 400);
  CHECK(to_api_error(Error(ErrorCode::UnknownSession, "")).status == 404);
  CHECK(to_api_error(Error(ErrorCode::CorpusNotLoaded, "")).status == 409);
}

TEST_CASE("session creation") {
  SessionService svc(mock_options());
  SUBCASE("valid body") {
    const auto id = create(svc);
    CHECK_FALSE(id.empty());
    const auto st = svc.handle("GET", "/api/sessions/" + id + "/status", "");
    CHECK(json::parse(st.body)["status"] == "ready");
    REQUIRE(svc.session(id));
    CHECK(svc.session(id)->records.size() == 12);
  }
  SUBCASE("invalid bodies") {
    auto r = svc.handle("POST", "/api/sessions", R"({"prompt":"x","gs_min":30,"gs_max":5})");
    CHECK(r.status == 400);
    CHECK(error_code(r) == "invalid_range");
    r = svc.handle("POST", "/api/sessions", "{oops");
    CHECK(r.status == 400);
    r = svc.handle("POST", "/api/sessions", R"({"gs_min":5})");
    CHECK(r.status == 400);
    r = svc.handle("POST", "/api/sessions", R"({"prompt":"x","n_generate":-1})");
    CHECK(r.status == 400);
    r = svc.handle("POST", "/api/sessions", R"({"prompt":"x","n_generate":"3"})");
    CHECK(r.status == 400);
  }
  SUBCASE("no corpus loaded") {
    auto o = mock_options();
    o.corpus.reset();
    SessionService bare(o);
    auto r = bare.handle("POST", "/api/sessions", kCreate);
    CHECK(r.status == 409);
    CHECK(error_code(r) == "corpus_not_loaded");
    r = bare.handle("POST", "/api/sessions", R"({"prompt":"x","n_generate":2,"k_retrieve":0})");
    CHECK(r.status == 201);
  }
  SUBCASE("unknown routes") {
    CHECK(svc.handle("GET", "/api/nothing", "").status == 404);
    CHECK(svc.handle("DELETE", "/api/sessions", "").status == 404);
    CHECK(svc.handle("GET", "/api/sessions/zzz/status", "").status == 404);
  }
}

TEST_CASE("layout document") {
  SessionService svc(mock_options());
  const auto id = create(svc);
  const auto a = svc.handle("GET", "/api/sessions/" + id + "/layout", "");
  REQUIRE(a.status == 200);
  CHECK(a.content_type == "application/json");
  const auto b = svc.handle("GET", "/api/sessions/" + id + "/layout", "");
  CHECK(a.body == b.body);
  const auto doc = json::parse(a.body);
  const auto state = svc.session(id);
  REQUIRE(doc["points"].size() == state->records.size());
  CHECK(doc["points"].size() == 12);
  const auto& p0 = doc["points"][0];
  std::vector<std::string> keys;
  for (auto it = p0.begin(); it != p0.end(); ++it) keys.push_back(it.key());
  CHECK(a.body.find(R"("id":)") < a.body.find(R"("x":)"));
  CHECK(p0.contains("representative"));
  CHECK(p0["image_url"] == "/api/images/" + p0["id"].get<std::string>());
  CHECK(p0["source"] == "generated");
  CHECK(p0["x"].get<double>() == state->layout[0].x);
  // 8 retrieved points form no eligible cluster here
  CHECK(doc["keywords"].is_array());
  CHECK(doc["keywords"].size() == state->placements.size());

  CHECK(svc.handle("GET", "/api/sessions/unknown/layout", "").status == 404);
}

TEST_CASE("keywords array is empty without eligible clusters") {
  SessionService svc(mock_options());
  const auto id = create(svc, R"({"prompt":"castle","n_generate":3,"k_retrieve":0})");
  const auto doc = json::parse(svc.handle("GET", "/api/sessions/" + id + "/layout", "").body);
  CHECK(doc["keywords"] == json::array());
  CHECK(doc["points"].size() == 3);
}

TEST_CASE("evaluate endpoint") {
  SessionService svc(mock_options());
  const auto id = create(svc);
  const std::string path = "/api/sessions/" + id + "/evaluate";
  const auto a = svc.handle("POST", path, R"({"keyword_a":"cute","keyword_b":"ugly","bins":10})");
  REQUIRE(a.status == 200);
  const auto doc = json::parse(a.body);
  CHECK(doc["ratings"].size() == 12);
  CHECK(doc["histogram"]["counts"].size() == 10);
  const auto b = svc.handle("POST", path, R"({"keyword_a":"cute","keyword_b":"ugly","bins":10})");
  CHECK(a.body == b.body);
  const auto d = svc.handle("POST", path, R"({"keyword_a":"cute"})");
  CHECK(json::parse(d.body)["criterion"]["keyword_b"] == "not cute");
  CHECK(svc.handle("POST", path, R"({"keyword_a":""})").status == 400);
  CHECK(svc.handle("POST", path, R"({"keyword_a":"x","bins":0})").status == 400);
  CHECK(svc.handle("POST", "/api/sessions/nope/evaluate", R"({"keyword_a":"x"})").status == 404);
}

TEST_CASE("selection endpoint") {
  SessionService svc(mock_options());
  const auto id = create(svc);
  const auto state = svc.session(id);
  const std::string path = "/api/sessions/" + id + "/selection";

  json all_db = json::array();
  std::vector<std::string> prompts;
  for (const auto& r : state->records) {
    if (r.source == RecordSource::db) all_db.push_back(r.id);
  }
  const auto full = svc.handle("POST", path, json{{"record_ids", all_db}, {"top_k", 5}}.dump());
  REQUIRE(full.status == 200);
  const auto doc = json::parse(full.body);
  CHECK_FALSE(doc["keywords"].empty());
  std::vector<std::string> ids = all_db.get<std::vector<std::string>>();
  std::sort(ids.begin(), ids.end());
  for (const auto& i : ids) prompts.push_back(state->record(i).prompt);
  const auto expected = selection_keywords(prompts, state->retrieved_prompts(), 5);
  REQUIRE(doc["keywords"].size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(doc["keywords"][i]["term"] == expected[i].term.text);
    CHECK(doc["keywords"][i]["tfidf"].get<double>() == expected[i].tfidf);
  }

  const auto single = svc.handle("POST", path, json{{"record_ids", json::array({state->records[0].id})}}.dump());
  REQUIRE(single.status == 200);
  std::size_t bars = 0;
  const auto single_doc = json::parse(single.body);
  for (const auto& c : single_doc["guidance_histogram"]["counts"]) bars += c.get<int>() > 0;
  CHECK(bars == 1);

  const auto empty = svc.handle("POST", path, R"({"record_ids":[]})");
  CHECK(empty.status == 400);
  CHECK(error_code(empty) == "empty_selection");
  const auto unknown = svc.handle("POST", path, R"({"record_ids":["nope"]})");
  CHECK(unknown.status == 400);
  CHECK(error_code(unknown) == "unknown_record");
  CHECK(svc.handle("POST", path, R"({"record_ids":"x"})").status == 400);
}

TEST_CASE("images and common pairs") {
  TempDir dir;
  auto o = mock_options();
  o.corpus_dir = dir.path();
  const auto& first = shared_corpus()->records()[0];
  std::filesystem::create_directories((dir.path() / first.image_ref).parent_path());
  const auto png = encode_solid_png(8, 8, {1, 2, 3});
  write_file_bytes(dir.path() / first.image_ref, png);

  SessionService svc(o);
  const auto id = create(svc);
  const auto state = svc.session(id);
  const auto gen = svc.handle("GET", "/api/images/" + state->records[0].id, "");
  CHECK(gen.status == 200);
  CHECK(gen.content_type == "image/png");
  const auto& stored = state->images.at(state->records[0].id);
  CHECK(gen.body == std::string(stored.begin(), stored.end()));
  const auto db = svc.handle("GET", "/api/images/" + first.id, "");
  CHECK(db.status == 200);
  CHECK(db.body == std::string(png.begin(), png.end()));
  CHECK(svc.handle("GET", "/api/images/missing", "").status == 404);
  CHECK(svc.handle("GET", "/api/images/" + shared_corpus()->records()[1].id, "").status == 404);

  const auto pairs = svc.handle("GET", "/api/common-pairs", "");
  CHECK(pairs.status == 200);
  CHECK(json::parse(pairs.body).is_array());
  CHECK_FALSE(json::parse(pairs.body).empty());
}

TEST_CASE("sessions can be persisted by the service") {
  TempDir dir;
  auto o = mock_options();
  o.sessions_dir = dir.path();
  SessionService svc(o);
  const auto id = create(svc);
  CHECK(std::filesystem::exists(dir.path() / id / "session.json"));
  CHECK(session_json(load_session(dir.path() / id)) == session_json(*svc.session(id)));
}

TEST_CASE("http backends over sockets: async creation and failures") {
  // Fake embedding and generation services backed by the mocks.
  httplib::Server backend;
  MockEmbedder reference;
  backend.Post("/embed_text", [&](const httplib::Request& req, httplib::Response& res) {
    res.set_content(json{{"vector", reference.embed_text(json::parse(req.body)["text"].get<std::string>())}}.dump(),
                    "application/json");
  });
  backend.Post("/embed_image", [&](const httplib::Request& req, httplib::Response& res) {
    const auto bytes = *base64_decode(json::parse(req.body)["png_base64"].get<std::string>());
    res.set_content(json{{"vector", reference.embed_image(bytes)}}.dump(), "application/json");
  });
  backend.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    const auto png = encode_solid_png(body["width"], body["height"], {static_cast<std::uint8_t>(body["seed"].get<std::uint64_t>() & 0xff), 0, 0});
    res.set_content(json{{"png_base64", base64_encode(png)}}.dump(), "application/json");
  });
  const int backend_port = backend.bind_to_any_port("127.0.0.1");
  std::thread backend_thread([&] { backend.listen_after_bind(); });
  backend.wait_until_ready();
  const std::string backend_url = "http://127.0.0.1:" + std::to_string(backend_port);

  // A port with nothing behind it.
  // httplib keeps the listening socket of an unused server open, so grab a port and close it by hand.
  int dead_port = 0;
  {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    dead_port = ntohs(addr.sin_port);
    ::close(fd);
  }
  const std::string dead_url = "http://127.0.0.1:" + std::to_string(dead_port);

  SUBCASE("async creation through a real server") {
    auto o = mock_options();
    o.embedder = std::make_shared<HttpEmbedder>(backend_url, std::chrono::milliseconds(10000));
    o.generator = std::make_shared<HttpGenerator>(backend_url, std::chrono::milliseconds(10000));
    o.config.image_width = 64;
    o.config.image_height = 64;
    o.async_creation = true;
    SessionService svc(o);
    httplib::Server api;
    mount_routes(api, svc);
    const int port = api.bind_to_any_port("127.0.0.1");
    std::thread api_thread([&] { api.listen_after_bind(); });
    api.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/api/sessions", kCreate, "application/json");
    REQUIRE(res);
    CHECK(res->status == 202);
    const auto id = json::parse(res->body)["session_id"].get<std::string>();
    std::string status = "pending";
    for (int i = 0; i < 600 && status == "pending"; ++i) {
      auto st = client.Get("/api/sessions/" + id + "/status");
      REQUIRE(st);
      status = json::parse(st->body)["status"].get<std::string>();
      if (status == "pending") std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    CHECK(status == "ready");
    auto layout = client.Get("/api/sessions/" + id + "/layout");
    REQUIRE(layout);
    CHECK(layout->status == 200);
    CHECK(json::parse(layout->body)["points"].size() == 12);
    auto missing = client.Get("/api/sessions/nope/layout");
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["error"]["code"] == "unknown_session");

    // same pipeline with the in-process mocks gives the same layout
    ServiceOptions mo = mock_options();
    mo.config = o.config;
    SessionService local(mo);
    const auto local_id = create(local);
    CHECK(local.session(local_id)->retrieved == svc.session(id)->retrieved);

    api.stop();
    api_thread.join();
  }

  SUBCASE("generator endpoint down gives 502") {
    auto o = mock_options();
    o.generator = std::make_shared<HttpGenerator>(dead_url, std::chrono::milliseconds(2000));
    SessionService svc(o);
    const auto r = svc.handle("POST", "/api/sessions", kCreate);
    CHECK(r.status == 502);
    CHECK(error_code(r) == "backend_unavailable");

    o.async_creation = true;
    SessionService async_svc(o);
    const auto accepted = async_svc.handle("POST", "/api/sessions", kCreate);
    CHECK(accepted.status == 202);
    async_svc.wait_idle();
    const auto id = json::parse(accepted.body)["session_id"].get<std::string>();
    const auto st = json::parse(async_svc.handle("GET", "/api/sessions/" + id + "/status", "").body);
    CHECK(st["status"] == "failed");
    CHECK(st["error"]["code"] == "backend_unavailable");
  }

  backend.stop();
  backend_thread.join();
}
