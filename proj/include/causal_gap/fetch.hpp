#pragma once

#include "causal_gap/error.hpp"
#include "causal_gap/pairs.hpp"

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace causal_gap {

inline constexpr const char* kDefaultPairsBaseUrl = "https://webdav.tuebingen.mpg.de/cause-effect/";

struct FetchOptions {
    std::size_t max_bytes = 10u << 20;
    int timeout_seconds = 30;
    /// Receives one line per file: "skip ...", "get ...".
    std::function<void(const std::string&)> log;
};

struct FetchResult {
    std::vector<std::filesystem::path> files;
    std::vector<std::filesystem::path> downloaded;
    std::vector<std::filesystem::path> skipped;
    std::size_t requests = 0;
};

namespace detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path, ending in '/'
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("base URL needs a scheme: " + url);
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ValidationError("unsupported URL scheme: " + scheme);
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl s;
    s.origin = url.substr(0, path_start);
    s.prefix = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (s.prefix.back() != '/') s.prefix += '/';
    return s;
}

inline bool pair_file_parses(const std::filesystem::path& p) {
    try {
        std::ifstream in(p);
        if (!in) return false;
        const auto cols = parse_columns(in, p.string());
        return cols.size() >= 2;
    } catch (const Error&) {
        return false;
    }
}

inline bool meta_file_parses(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) return false;
    std::string line;
    std::size_t records = 0;
    while (std::getline(in, line)) {
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() != 6) return false;
        int v;
        for (std::size_t k = 0; k < 5; ++k) {
            if (!parse_int(tok[k], v)) return false;
        }
        ++records;
    }
    return records > 0;
}

inline std::string http_get(httplib::Client& cli, const std::string& origin, const std::string& path,
                            const FetchOptions& opt, const std::string& what) {
    std::string body;
    bool too_big = false;
    auto res = cli.Get(path, [&](const char* data, std::size_t len) {
        if (body.size() + len > opt.max_bytes) {
            too_big = true;
            return false;
        }
        body.append(data, len);
        return true;
    });
    if (too_big) {
        throw FetchError(what + ": response exceeds " + std::to_string(opt.max_bytes) + " bytes");
    }
    if (!res) {
        throw FetchError(what + ": request to " + origin + path + " failed (" + httplib::to_string(res.error()) +
                         ")");
    }
    if (res->status != 200) {
        throw FetchError(what + ": HTTP " + std::to_string(res->status) + " from " + origin + path);
    }
    return body;
}

}  // namespace detail

/// Downloads pairNNNN.txt for each id plus pairmeta.txt into `dest`.
/// Files already present that parse are kept without any request.
inline FetchResult fetch_pairs(const std::vector<int>& ids, const std::string& base_url,
                               const std::filesystem::path& dest, const FetchOptions& opt = {}) {
    const auto url = detail::split_url(base_url);
    std::error_code ec;
    std::filesystem::create_directories(dest, ec);
    if (ec) throw IoError("cannot create " + dest.string() + ": " + ec.message());

    struct Item {
        std::string name;
        std::string what;
        bool meta;
    };
    std::vector<Item> items;
    for (int id : ids) {
        detail::require(id >= 0 && id <= 9999, "fetch: invalid pair id " + std::to_string(id));
        items.push_back({pair_file_name(id), "pair " + std::to_string(id), false});
    }
    items.push_back({"pairmeta.txt", "pair metadata", true});

    FetchResult out;
    std::unique_ptr<httplib::Client> cli;
    for (const auto& item : items) {
        const auto path = dest / item.name;
        const bool ok = item.meta ? detail::meta_file_parses(path) : detail::pair_file_parses(path);
        if (ok) {
            if (opt.log) opt.log("skip " + path.string() + " (present and parseable)");
            out.skipped.push_back(path);
            out.files.push_back(path);
            continue;
        }
        if (!cli) {
            try {
                cli = std::make_unique<httplib::Client>(url.origin);
            } catch (const std::exception& e) {
                throw FetchError("cannot create client for " + url.origin + ": " + e.what());
            }
            if (!cli->is_valid()) throw FetchError("cannot create client for " + url.origin);
            cli->set_connection_timeout(opt.timeout_seconds, 0);
            cli->set_read_timeout(opt.timeout_seconds, 0);
            cli->set_follow_location(true);
        }
        if (opt.log) opt.log("get " + url.origin + url.prefix + item.name);
        ++out.requests;
        const std::string body = detail::http_get(*cli, url.origin, url.prefix + item.name, opt, item.what);
        const auto tmp = dest / (item.name + ".part");
        {
            std::ofstream f(tmp, std::ios::binary);
            if (!f) throw IoError("cannot write " + tmp.string());
            f << body;
            if (!f) throw IoError("write failed: " + tmp.string());
        }
        const bool parses = item.meta ? detail::meta_file_parses(tmp) : detail::pair_file_parses(tmp);
        if (!parses) {
            std::filesystem::remove(tmp, ec);
            throw FetchError(item.what + ": downloaded content does not parse");
        }
        std::filesystem::rename(tmp, path, ec);
        if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
        out.downloaded.push_back(path);
        out.files.push_back(path);
    }
    return out;
}

}  // namespace causal_gap
