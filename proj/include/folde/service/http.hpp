#pragma once

#include <string>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "folde/service/campaign.hpp"

#include <httplib.h>

namespace folde::service {

// JSON bodies throughout. Errors come back as {"error": message} with
// 400 (bad input), 404 (unknown campaign), 409 (wrong state) or 500.
//
//   GET  /campaigns                    -> {"campaigns": [id...]}
//   POST /campaigns                    <- {"id"?, "reference"?, "embeddings", "logprobs", "ground_truth"?, "config"?}
//                                      -> 201, campaign state
//   GET  /campaigns/{id}               -> campaign state
//   POST /campaigns/{id}/propose       -> {"round", "alpha", "proposal": [{variant, naturalness, consensus, ucb}]}
//   POST /campaigns/{id}/measurements  <- {"measurements": [{"variant", "activity" (number or null = failed)}]}
//                                      -> campaign state
//   GET  /campaigns/{id}/metrics       -> per-round metrics

inline CreateRequest create_request_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("request body must be an object");
    CreateRequest r;
    try {
        r.id = j.value("id", std::string());
        r.reference = j.value("reference", std::string());
        r.embeddings = j.value("embeddings", std::string());
        r.logprobs = j.value("logprobs", std::string());
        r.ground_truth = j.value("ground_truth", std::string());
        if (j.contains("config")) r.config = config_from_json(j.at("config"));
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
    return r;
}

inline std::vector<MeasurementInput> measurements_from_json(const json& j) {
    if (!j.is_object() || !j.contains("measurements") || !j.at("measurements").is_array())
        throw ParseError("body must be {\"measurements\": [...]}");
    std::vector<MeasurementInput> out;
    for (const auto& m : j.at("measurements")) {
        if (!m.is_object() || !m.contains("variant") || !m.at("variant").is_string())
            throw ParseError("each measurement needs a variant string");
        out.push_back({m.at("variant").get<std::string>(), optional_real(m, "activity")});
    }
    return out;
}

inline json round_json(const LiveRound& r) {
    const auto j = to_json(r);
    return json{{"round", j["round"]}, {"alpha", j["alpha"]}, {"proposal", j["proposal"]}};
}

inline void install_routes(httplib::Server& server, CampaignService& svc) {
    auto reply = [](httplib::Response& res, int code, const json& body) {
        res.status = code;
        res.set_content(body.dump(), "application/json");
    };
    auto guarded = [reply](auto&& fn) {
        return [fn, reply](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const NotFound& e) {
                reply(res, 404, {{"error", e.what()}});
            } catch (const StateError& e) {
                reply(res, 409, {{"error", e.what()}});
            } catch (const json::exception& e) {
                reply(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}});
            } catch (const ParseError& e) {
                reply(res, 400, {{"error", e.what()}});
            } catch (const InvariantError& e) {
                reply(res, 400, {{"error", e.what()}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", e.what()}});
            }
        };
    };
    const std::string id = R"(/campaigns/([A-Za-z0-9_-]+))";

    server.Get("/campaigns", guarded([&svc, reply](const httplib::Request&, httplib::Response& res) {
                   reply(res, 200, {{"campaigns", svc.list()}});
               }));
    server.Post("/campaigns", guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
                    reply(res, 201, to_json(svc.create(create_request_from_json(json::parse(req.body)))));
                }));
    server.Get(id, guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
                   reply(res, 200, to_json(svc.get(req.matches[1])));
               }));
    server.Post(id + "/propose", guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
                    reply(res, 200, round_json(svc.propose(req.matches[1])));
                }));
    server.Post(id + "/measurements", guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
                    const auto inputs = measurements_from_json(json::parse(req.body));
                    reply(res, 200, to_json(svc.record(req.matches[1], inputs)));
                }));
    server.Get(id + "/metrics", guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
                   reply(res, 200, svc.metrics(req.matches[1]));
               }));
    // The browser client may be served from another origin.
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

}  // namespace folde::service
