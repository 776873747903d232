#include <gtest/gtest.h>

#include <random>
#include <thread>

#include <cityalert/geo.hpp>

#include "test_support.hpp"

using namespace cityalert;

namespace {

SanitizedPost tokens(std::vector<std::string> t) {
    SanitizedPost s;
    s.tokens = std::move(t);
    return s;
}

class FakeGeocoder : public Geocoder {
public:
    std::optional<GeoPoint> answer;
    bool fail = false;
    int calls = 0;
    std::string last_query;

    std::optional<GeoPoint> lookup(std::string_view q) override {
        ++calls;
        last_query = q;
        if (fail) throw GeocoderUnavailable("down");
        return answer;
    }
};

} // namespace

TEST(Geo, MetadataPassthrough) {
    RawPost post{"1", "fire", Coordinates{19.12, 72.91}, {}, ""};
    auto p = resolve_location(post, tokens({"fire", "powai"}), Gazetteer::load(cityalert::testing::data_path("gazetteer.tsv")));
    ASSERT_TRUE(p);
    EXPECT_EQ(p->lat, 19.12);
    EXPECT_EQ(p->lon, 72.91);
    EXPECT_EQ(p->source, GeoSource::PostMetadata);
}

TEST(Geo, BundledGazetteerResolvesPowai) {
    auto gaz = Gazetteer::load(cityalert::testing::data_path("gazetteer.tsv"));
    RawPost post{"1", "fire at powai", std::nullopt, {}, ""};
    auto p = resolve_location(post, tokens({"fire", "at", "powai"}), gaz);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->source, GeoSource::Gazetteer);
    EXPECT_EQ(p->lat, 19.1176);
    EXPECT_EQ(p->lon, 72.9060);
    EXPECT_EQ(p->place_name, "powai");
    for (const auto& place : {"andheri", "bandra", "dadar", "colaba", "juhu", "kurla", "worli", "vikhroli",
                              "ghatkopar", "borivali", "malad", "chembur", "mulund", "goregaon", "sion"}) {
        auto c = gaz.find(place);
        ASSERT_TRUE(c) << place;
        EXPECT_TRUE(in_bounds(*c, kMumbaiBox)) << place;
    }
}

TEST(Geo, NothingToResolve) {
    Gazetteer gaz;
    gaz.add("powai", {19.1176, 72.9060});
    RawPost post{"1", "great weather", std::nullopt, {}, ""};
    EXPECT_FALSE(resolve_location(post, tokens({"great", "weather"}), gaz));
}

TEST(Geo, LongestMatchWins) {
    Gazetteer gaz;
    gaz.add("marine", {1, 1});
    gaz.add("Marine Drive", {2, 2});
    gaz.add("drive", {3, 3});
    auto p = gaz.match({"crash", "on", "marine", "drive", "now"});
    ASSERT_TRUE(p);
    EXPECT_EQ(p->lat, 2);
    EXPECT_EQ(p->place_name, "marine drive");
    auto first = gaz.match({"drive", "to", "marine"});
    ASSERT_TRUE(first);
    EXPECT_EQ(first->lat, 3);
}

TEST(Geo, ExternalGeocoderUsedOnceAndOnlyAsLastResort) {
    Gazetteer gaz;
    gaz.add("powai", {19.1176, 72.9060});
    FakeGeocoder fake;
    fake.answer = GeoPoint{19.0, 72.8, GeoSource::ExternalGeocoder, "x"};
    RawPost post{"1", "t", std::nullopt, {}, ""};

    resolve_location(post, tokens({"fire", "powai"}), gaz, &fake);
    EXPECT_EQ(fake.calls, 0);
    post.coords = Coordinates{19.1, 72.9};
    resolve_location(post, tokens({"fire", "nowhere"}), gaz, &fake);
    EXPECT_EQ(fake.calls, 0);

    post.coords.reset();
    auto p = resolve_location(post, tokens({"fire", "nowhere"}), gaz, &fake);
    EXPECT_EQ(fake.calls, 1);
    EXPECT_EQ(fake.last_query, "fire nowhere");
    ASSERT_TRUE(p);
    EXPECT_EQ(p->source, GeoSource::ExternalGeocoder);

    fake.fail = true;
    EXPECT_THROW(resolve_location(post, tokens({"fire"}), gaz, &fake), GeocoderUnavailable);
    EXPECT_EQ(fake.calls, 2);
}

TEST(Geo, DeterministicWithoutBackend) {
    auto gaz = Gazetteer::load(cityalert::testing::data_path("gazetteer.tsv"));
    std::mt19937 rng(4);
    const std::vector<std::string> words{"fire", "at", "powai", "saki", "naka", "andheri", "marine", "drive", "x"};
    for (int i = 0; i < 200; ++i) {
        std::vector<std::string> t;
        for (int w = 0; w < 6; ++w) t.push_back(words[rng() % words.size()]);
        RawPost post{"p", "t", std::nullopt, {}, ""};
        EXPECT_EQ(resolve_location(post, tokens(t), gaz), resolve_location(post, tokens(t), gaz));
    }
}

TEST(Geo, InBoundsExamples) {
    EXPECT_TRUE(in_bounds(GeoPoint{19.12, 72.91}, kMumbaiBox));
    EXPECT_TRUE(in_bounds(GeoPoint{18.89, 72.77}, kMumbaiBox));
    EXPECT_TRUE(in_bounds(GeoPoint{19.28, 73.03}, kMumbaiBox));
    EXPECT_FALSE(in_bounds(GeoPoint{0, 0}, kMumbaiBox));
}

TEST(Geo, InBoundsAgreesWithIntervalChecks) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> lat(18.5, 19.6), lon(72.4, 73.4);
    int inside = 0;
    for (int i = 0; i < 1000; ++i) {
        GeoPoint p{lat(rng), lon(rng)};
        if (i % 10 == 0) p.lat = kMumbaiBox.max_lat;  // exercise the closed edge
        bool a = kMumbaiBox.min_lat <= p.lat;
        bool b = p.lat <= kMumbaiBox.max_lat;
        bool c = kMumbaiBox.min_lon <= p.lon;
        bool d = p.lon <= kMumbaiBox.max_lon;
        EXPECT_EQ(in_bounds(p, kMumbaiBox), a && b && c && d) << p.lat << "," << p.lon;
        inside += a && b && c && d;
    }
    EXPECT_GT(inside, 50);
    EXPECT_LT(inside, 950);
}

TEST(Geo, BboxParsing) {
    EXPECT_EQ(parse_bbox("18.89,72.77,19.28,73.03"), kMumbaiBox);
    EXPECT_THROW(parse_bbox("1,2,3"), FormatError);
    EXPECT_THROW(parse_bbox("19,72,18,73"), FormatError);
    EXPECT_THROW(parse_bbox("a,b,c,d"), FormatError);
    nlohmann::json j = kMumbaiBox;
    EXPECT_EQ(j.get<BoundingBox>(), kMumbaiBox);
}

TEST(Geo, GazetteerRejectsBadRows) {
    cityalert::testing::TempDir dir("gaz");
    {
        std::ofstream(dir.file("a.tsv")) << "powai\t19.1\n";
        std::ofstream(dir.file("b.tsv")) << "powai\t95\t72\n";
        std::ofstream(dir.file("c.tsv")) << "powai\tnorth\t72\n";
    }
    EXPECT_THROW(Gazetteer::load(dir.file("a.tsv")), FormatError);
    EXPECT_THROW(Gazetteer::load(dir.file("b.tsv")), FormatError);
    EXPECT_THROW(Gazetteer::load(dir.file("c.tsv")), FormatError);
}

TEST(Geo, GeoPointJsonRoundTrip) {
    GeoPoint p{19.1176, 72.906, GeoSource::Gazetteer, "powai"};
    nlohmann::json j = p;
    EXPECT_EQ(j["source"], "gazetteer");
    EXPECT_EQ(j.get<GeoPoint>(), p);
}

TEST(HttpGeocoder, DottedPathsAndQuery) {
    httplib::Server srv;
    std::string seen_q, seen_key;
    srv.Get("/search", [&](const httplib::Request& req, httplib::Response& res) {
        seen_q = req.get_param_value("address");
        seen_key = req.get_param_value("apikey");
        if (seen_q == "unknown place") {
            res.set_content(R"({"results":[]})", "application/json");
            return;
        }
        res.set_content(R"({"results":[{"geometry":{"lat":19.1,"lng":"72.9"}}]})", "application/json");
    });
    int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    HttpGeocoderConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/search";
    cfg.query_param = "address";
    cfg.key_param = "apikey";
    cfg.api_key = "secret";
    cfg.lat_path = "results.0.geometry.lat";
    cfg.lon_path = "results.0.geometry.lng";
    HttpGeocoder geo(cfg);
    auto p = geo.lookup("powai lake");
    ASSERT_TRUE(p);
    EXPECT_EQ(p->lat, 19.1);
    EXPECT_EQ(p->lon, 72.9);
    EXPECT_EQ(p->source, GeoSource::ExternalGeocoder);
    EXPECT_EQ(seen_q, "powai lake");
    EXPECT_EQ(seen_key, "secret");
    EXPECT_FALSE(geo.lookup("unknown place"));
    srv.stop();
    t.join();
}

TEST(HttpGeocoder, UnreachableBackendThrowsWithinTimeout) {
    // Bind then release a port so nothing listens on it.
    int port;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    HttpGeocoderConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/geo";
    cfg.timeout = std::chrono::milliseconds(300);
    HttpGeocoder geo(cfg);
    auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(geo.lookup("powai"), GeocoderUnavailable);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(2));
    EXPECT_THROW(HttpGeocoder(HttpGeocoderConfig{"ftp://x"}), ConfigError);
}
