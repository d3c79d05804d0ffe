#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "fieldlabel/review/store.hpp"

namespace fieldlabel::review {

namespace detail {

inline void send_json(httplib::Response& res, const nlohmann::ordered_json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump() + "\n", "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = message;
    send_json(res, j, status);
}

inline std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    auto v = req.get_param_value(name);
    if (v.empty()) return std::nullopt;
    return v;
}

/// Maps store exceptions onto HTTP status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const NotFound& e) {
        send_error(res, 404, e.what());
    } catch (const UsageError& e) {
        send_error(res, 400, e.what());
    } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, std::string("malformed JSON body: ") + e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

}  // namespace detail

/// Registers the review API on `server`. Site images are read from <images_dir>/<site_id>.png.
///
///   GET  /sites?split=&strategy=&status=
///   GET  /sites/{id}?strategy=
///   GET  /sites/{id}/image.png
///   POST /decisions   {"site_id","instance_id","verdict","reviewer"} or
///                     {"site_id","all":"accepted"|"rejected","reviewer","strategy"?}
///   GET  /export?strategy=&policy=accepted_only|accepted_plus_pending
inline void install_routes(httplib::Server& server, ReviewStore& store, std::filesystem::path images_dir = {}) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    server.Get("/sites", [&store](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            SiteFilter f;
            if (auto s = detail::param(req, "split")) {
                try {
                    f.split = parse_split(*s);
                } catch (const DataError& e) {
                    throw UsageError(e.what());
                }
            }
            f.strategy = detail::param(req, "strategy");
            f.status = detail::param(req, "status");
            nlohmann::ordered_json j;
            auto& arr = j["sites"] = nlohmann::ordered_json::array();
            for (const auto& s : store.list_sites(f)) arr.push_back(to_json(s));
            detail::send_json(res, j);
        });
    });

    server.Get(R"(/sites/([^/]+)/image\.png)", [images_dir](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const std::string site = req.matches[1];
            const auto path = images_dir / (site + ".png");
            if (images_dir.empty() || site.find("..") != std::string::npos || !std::filesystem::exists(path)) {
                throw NotFound("no image for site '" + site + "'");
            }
            res.set_content(read_text_file(path), "image/png");
        });
    });

    server.Get(R"(/sites/([^/]+))", [&store, images_dir](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const std::string site = req.matches[1];
            const bool has_image = !images_dir.empty() && std::filesystem::exists(images_dir / (site + ".png"));
            detail::send_json(res, store.site_payload(site, detail::param(req, "strategy"),
                                                      has_image ? "/sites/" + site + "/image.png" : std::string{}));
        });
    });

    server.Post("/decisions", [&store](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const auto body = nlohmann::json::parse(req.body);
            if (body.is_object() && body.contains("all")) {
                const auto verdict = parse_verdict(body.at("all").get<std::string>());
                if (verdict == Verdict::pending) throw UsageError("site-level decisions must be accepted or rejected");
                std::optional<std::string> strategy;
                if (body.contains("strategy") && body["strategy"].is_string()) strategy = body["strategy"].get<std::string>();
                const auto stored = store.decide_site(body.at("site_id").get<std::string>(), verdict,
                                                      body.value("reviewer", std::string()), strategy);
                nlohmann::ordered_json j;
                auto& arr = j["decisions"] = nlohmann::ordered_json::array();
                for (const auto& d : stored) arr.push_back(to_json(d));
                detail::send_json(res, j);
                return;
            }
            auto d = decision_from_json(body);
            d.seq = 0;  // assigned by the store
            detail::send_json(res, to_json(store.post(std::move(d))));
        });
    });

    server.Get("/export", [&store](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const auto strategy = detail::param(req, "strategy");
            if (!strategy) throw UsageError("missing query parameter 'strategy'");
            const auto policy_name = detail::param(req, "policy").value_or("accepted_only");
            const auto exported = store.export_curated(*strategy, parse_policy(policy_name));
            nlohmann::ordered_json j;
            j["strategy"] = *strategy;
            j["policy"] = policy_name;
            std::size_t total = 0;
            auto& arr = j["sites"] = nlohmann::ordered_json::array();
            for (const auto& e : exported) {
                nlohmann::ordered_json s;
                s["site_id"] = e.site_id;
                s["n_labels"] = e.labels.labels.size();
                s["path"] = e.path.string();
                total += e.labels.labels.size();
                arr.push_back(std::move(s));
            }
            j["total"] = total;
            detail::send_json(res, j);
        });
    });
}

}  // namespace fieldlabel::review
