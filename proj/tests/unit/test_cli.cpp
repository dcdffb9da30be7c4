#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hopon/cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
    std::vector<std::string> artifacts;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const auto r = hopon::cli::execute(args, out, err);
    // Nonzero exit always comes with a diagnostic, and only then.
    CHECK((r.exit_code != 0) == !err.str().empty());
    return {r.exit_code, out.str(), err.str(), r.artifacts};
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("hopon-cli-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    [[nodiscard]] std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = hopon::test::read_file(e.path().string());
    return files;
}

const std::string reference_scn = hopon::test::fixture("reference.scn");

}  // namespace

TEST_CASE("validate succeeds quietly and writes nothing") {
    TempDir dir;
    const auto before = fs::current_path();
    fs::current_path(dir.path);
    const auto r = cli({"validate", reference_scn});
    fs::current_path(before);
    CHECK(r.code == 0);
    CHECK(r.artifacts.empty());
    CHECK(fs::is_empty(dir.path));
}

TEST_CASE("exit codes") {
    TempDir dir;
    CHECK(cli({}).code == 3);
    CHECK(cli({"launch", reference_scn}).code == 3);
    CHECK(cli({"validate", reference_scn, "--bogus"}).code == 3);
    CHECK(cli({"run", reference_scn}).code == 3);

    const auto missing = cli({"validate", dir / "nope.scn"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("nope.scn") != std::string::npos);

    std::ofstream(dir / "broken.scn") << "{ \"infrastructure\": ";
    CHECK(cli({"validate", dir / "broken.scn"}).code == 1);

    auto text = hopon::test::read_file(reference_scn);
    const std::string dangling = "\"duration_s\": 10";
    REQUIRE(text.find(dangling) != std::string::npos);
    text.replace(text.find(dangling), dangling.size(), "\"duration_s\": -1");
    std::ofstream(dir / "negative.scn") << text;
    CHECK(cli({"run", dir / "negative.scn", "--metrics", dir / "m.json"}).code == 1);

    // Links too thin for the tunnels: the scenario parses, composition fails.
    auto thin = hopon::test::read_file(reference_scn);
    for (auto at = thin.find("100000000"); at != std::string::npos; at = thin.find("100000000", at))
        thin.replace(at, 9, "1000");
    std::ofstream(dir / "thin.scn") << thin;
    const auto rejected = cli({"compose", dir / "thin.scn", "--out", dir / "thin"});
    CHECK(rejected.code == 2);
    CHECK(rejected.err.find("link") != std::string::npos);
}

TEST_CASE("compose writes the golden documents, identically twice") {
    TempDir dir;
    const auto first = cli({"compose", reference_scn, "--out", dir / "a"});
    REQUIRE(first.code == 0);
    CHECK(!first.artifacts.empty());
    const auto second = cli({"compose", reference_scn, "--out", dir / "b"});
    REQUIRE(second.code == 0);
    const auto a = tree(dir.path / "a");
    CHECK(a == tree(dir.path / "b"));

    const fs::path golden = hopon::test::fixture("golden");
    std::size_t compared = 0;
    for (const auto& [rel, content] : tree(golden)) {
        REQUIRE(a.contains(rel));
        CHECK_MESSAGE(a.at(rel) == content, rel);
        ++compared;
    }
    CHECK(compared >= 12);
}

TEST_CASE("run with and without a trace writes the same metrics") {
    TempDir dir;
    const auto sc = hopon::test::fixture("fixed_hop_on.scn");
    REQUIRE(cli({"run", sc, "--metrics", dir / "plain.json"}).code == 0);
    const auto traced = cli({"run", sc, "--metrics", dir / "traced.json", "--trace", dir / "trace.csv"});
    REQUIRE(traced.code == 0);
    CHECK(traced.artifacts.size() == 2);
    CHECK(hopon::test::read_file(dir / "plain.json") == hopon::test::read_file(dir / "traced.json"));
    CHECK(hopon::test::read_file(dir / "trace.csv").rfind("packet_id,", 0) == 0);
}

TEST_CASE("compare reports zero hop-on session signaling") {
    TempDir dir;
    const auto r = cli({"compare", hopon::test::fixture("fixed_hop_on.scn"), "--metrics", dir / "cmp.json"});
    REQUIRE(r.code == 0);
    const auto j = hopon::Json::parse(hopon::test::read_file(dir / "cmp.json"));
    CHECK(j.at("session_signaling").at("hop_on").get<int>() == 0);
    CHECK(j.at("session_signaling").at("session_baseline").get<int>() == 30);
}

TEST_CASE("export-dot writes a digraph") {
    TempDir dir;
    REQUIRE(cli({"export-dot", reference_scn, "--out", dir / "vn.dot"}).code == 0);
    const auto dot = hopon::test::read_file(dir / "vn.dot");
    CHECK(dot.rfind("digraph", 0) == 0);
}
