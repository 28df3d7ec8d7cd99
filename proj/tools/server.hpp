#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>

#include "httplib.h"

#include "commands.hpp"

namespace fusedpath::cli {

/// Read-only state behind the HTTP API, computed once at startup.
class ServiceState {
public:
    ServiceState(Prepared prep, Fitted fitted, fs::path out_dir)
        : prep_(std::move(prep)), fitted_(std::move(fitted)), out_dir_(std::move(out_dir)) {
        meta_ = meta_json(prep_.standardized, prep_.stats).dump();
        path_ = path_json(prep_.standardized, prep_.stats, prep_.problem, fitted_.path).dump();
        cv_ = cv_json(prep_.standardized, fitted_.cv, fitted_.aic).dump();
    }

    const std::string& meta() const { return meta_; }
    const std::string& path() const { return path_; }
    const std::string& cv() const { return cv_; }
    const PathResult& path_result() const { return fitted_.path; }

    double lambda_max() const { return fitted_.path.points.back().lambda; }

    /// Grid index nearest to lambda, or nullopt when lambda is outside [0, lambda_max].
    std::optional<std::size_t> grid_index(double lambda) const {
        const double hi = lambda_max();
        if (!(lambda >= 0.0) || lambda > hi * (1.0 + 1e-12)) return std::nullopt;
        return fitted_.path.nearest(lambda);
    }

    Json model(std::size_t index) const {
        return model_json(prep_.standardized, prep_.stats, prep_.problem, fitted_.path, index);
    }

    /// Writes the model at `index` to a new timestamped file and returns its path.
    fs::path write_selection(std::size_t index) {
        std::lock_guard lock(write_mutex_);
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch()).count();
        // successive commits always get distinct timestamps
        if (ms <= last_ms_) ms = last_ms_ + 1;
        last_ms_ = ms;
        fs::path file;
        for (int suffix = 0;; ++suffix) {
            file = out_dir_ / ("selected_model_" + std::to_string(ms) + (suffix ? "_" + std::to_string(suffix) : "") + ".json");
            if (!fs::exists(file)) break;
        }
        write_json(file, model(index));
        return file;
    }

private:
    Prepared prep_;
    Fitted fitted_;
    fs::path out_dir_;
    std::string meta_, path_, cv_;
    std::mutex write_mutex_;
    long long last_ms_ = 0;
};

namespace detail {

inline void send_json(httplib::Response& res, const std::string& body, int status = 200) {
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body, "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message, const ServiceState* state = nullptr) {
    Json j;
    j["schema"] = kSchemaVersion;
    j["error"] = message;
    if (state) j["bounds"] = {0.0, state->lambda_max()};
    send_json(res, j.dump(), status);
}

} // namespace detail

/// Registers the /api routes on `server`.
inline void install_routes(httplib::Server& server, ServiceState& state) {
    server.Get("/api/meta", [&](const httplib::Request&, httplib::Response& res) { detail::send_json(res, state.meta()); });
    server.Get("/api/path", [&](const httplib::Request&, httplib::Response& res) { detail::send_json(res, state.path()); });
    server.Get("/api/cv", [&](const httplib::Request&, httplib::Response& res) { detail::send_json(res, state.cv()); });

    server.Get("/api/model", [&](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("lambda")) return detail::send_error(res, 400, "missing query parameter 'lambda'", &state);
        const auto lambda = fusedpath::detail::parse_double(req.get_param_value("lambda"));
        if (!lambda) return detail::send_error(res, 400, "lambda is not a number", &state);
        const auto index = state.grid_index(*lambda);
        if (!index) return detail::send_error(res, 400, "lambda outside [0, lambda_max]", &state);
        detail::send_json(res, state.model(*index).dump(2) + "\n");
    });

    server.Post("/api/select", [&](const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
            body = Json::parse(req.body);
        } catch (const Json::parse_error&) {
            return detail::send_error(res, 400, "body must be JSON {\"lambda\": number}");
        }
        if (!body.is_object() || !body.contains("lambda") || !body["lambda"].is_number())
            return detail::send_error(res, 400, "body must be JSON {\"lambda\": number}");
        const auto index = state.grid_index(body["lambda"].get<double>());
        if (!index) return detail::send_error(res, 400, "lambda outside [0, lambda_max]", &state);
        try {
            const auto file = state.write_selection(*index);
            Json j;
            j["schema"] = kSchemaVersion;
            j["file"] = file.string();
            j["lambda"] = state.path_result().points[*index].lambda;
            j["lambda_index"] = *index;
            detail::send_json(res, j.dump());
        } catch (const std::exception& e) {
            detail::send_error(res, 500, e.what());
        }
    });
}

/// Precomputes path and CV, then serves until stopped. Returns an exit code.
inline int cmd_serve(const RunConfig& cfg, std::ostream& log) {
    auto prep = prepare(cfg, log);
    const auto dir = output_dir(cfg);
    auto fitted = fit_all(prep, cfg, log);
    ServiceState state(std::move(prep), std::move(fitted), dir);
    httplib::Server server;
    // httplib defaults to SO_REUSEPORT, which would silently share a busy port
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    install_routes(server, state);
    if (!server.bind_to_port(cfg.host, cfg.port)) throw UsageError("cannot bind " + cfg.host + ":" + std::to_string(cfg.port) + " (port busy?)");
    log << "serving on http://" << cfg.host << ':' << cfg.port << '\n';
    return server.listen_after_bind() ? 0 : 1;
}

} // namespace fusedpath::cli
