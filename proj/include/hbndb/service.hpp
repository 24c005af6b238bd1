#pragma once

#include <openssl/evp.h>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "hbndb/constants.hpp"
#include "hbndb/db/query.hpp"
#include "hbndb/db/sqlite_io.hpp"
#include "hbndb/db/store.hpp"
#include "hbndb/emission.hpp"
#include "hbndb/errors.hpp"

namespace hbndb::service {

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::io, "SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;
    std::filesystem::path db_path = std::string(db::default_db_filename);
    std::vector<std::string> cors_origins;  // "*" admits any origin
    double stored_refractive_index = constants::default_refractive_index;
};

/// Transport-independent response; `mount` copies it onto httplib.
struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::map<std::string, std::string> headers;
};

/// A sealed snapshot with its exported bytes and digest, built once at publish time.
struct Published {
    std::shared_ptr<const db::Snapshot> snapshot;
    std::string sqlite_bytes;
    std::string sha256;
};

using Params = std::multimap<std::string, std::string>;

inline int http_status(ErrorKind k) {
    switch (k) {
        case ErrorKind::not_found: return 404;
        case ErrorKind::io: return 500;
        default: return 400;
    }
}

inline Response error_response(int status, std::string_view kind, const std::string& message,
                               const std::string& field = "") {
    nlohmann::json j;
    j["error"] = {{"kind", std::string(kind)}, {"message", message}};
    if (!field.empty()) j["error"]["field"] = field;
    return {status, "application/json", j.dump(), {}};
}

inline Response error_response(const Error& e) {
    return error_response(http_status(e.kind()), to_string(e.kind()), e.what(), e.field());
}

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(',', start);
        if (end == std::string_view::npos) end = s.size();
        auto item = s.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) out.emplace_back(item);
        start = end + 1;
    }
    return out;
}

inline double parse_number(const std::string& s, const char* field) {
    double v = 0.0;
    const char* b = s.data();
    if (!s.empty() && s[0] == '+') ++b;
    auto [p, ec] = std::from_chars(b, s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw Error(ErrorKind::validation, std::string("'") + s + "' is not a number", field);
    return v;
}

inline int parse_integer(const std::string& s, const char* field) {
    int v = 0;
    const char* b = s.data();
    if (!s.empty() && s[0] == '+') ++b;
    auto [p, ec] = std::from_chars(b, s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw Error(ErrorKind::validation, std::string("'") + s + "' is not an integer", field);
    return v;
}

}  // namespace detail

enum class Format { json, csv, sqlite };

struct DefectsRequest {
    db::QueryFilters filters;
    Format format = Format::json;
};

/// URL parameters: option, host, spin_multiplicity, charge_state, optical_spin_transition take
/// comma-separated lists (repeating a parameter appends); value_range=lo,hi; format=json|csv|sqlite;
/// download_db=true is the same as format=sqlite. Unknown parameters are rejected.
inline DefectsRequest parse_defects_request(const Params& params) {
    DefectsRequest req;
    auto& f = req.filters;
    auto append = [](std::optional<std::vector<std::string>>& dst, const std::string& v) {
        if (!dst) dst.emplace();
        for (auto& item : detail::split_list(v)) dst->push_back(std::move(item));
    };
    std::optional<std::string> format;
    bool download = false;
    for (const auto& [key, value] : params) {
        if (key == "option") {
            for (auto& item : detail::split_list(value)) f.option.push_back(std::move(item));
        } else if (key == "host") {
            append(f.host, value);
        } else if (key == "spin_multiplicity") {
            append(f.spin_multiplicity, value);
        } else if (key == "optical_spin_transition") {
            append(f.optical_spin_transition, value);
        } else if (key == "charge_state") {
            if (!f.charge_state) f.charge_state.emplace();
            for (const auto& item : detail::split_list(value))
                f.charge_state->push_back(detail::parse_integer(item, "charge_state"));
        } else if (key == "value_range") {
            auto parts = detail::split_list(value);
            if (parts.size() != 2 || f.value_range)
                throw Error(ErrorKind::validation, "value_range must be 'lo,hi'", "value_range");
            f.value_range = std::pair{detail::parse_number(parts[0], "value_range"),
                                      detail::parse_number(parts[1], "value_range")};
        } else if (key == "format") {
            format = value;
        } else if (key == "download_db") {
            if (value == "true" || value == "1") download = true;
            else if (value != "false" && value != "0")
                throw Error(ErrorKind::validation, "download_db must be true or false", "download_db");
        } else {
            throw Error(ErrorKind::validation, "unknown parameter '" + key + "'", key);
        }
    }
    if (format) {
        if (*format == "json") req.format = Format::json;
        else if (*format == "csv") req.format = Format::csv;
        else if (*format == "sqlite") req.format = Format::sqlite;
        else throw Error(ErrorKind::validation, "format must be json, csv or sqlite", "format");
    }
    if (download) {
        if (format && req.format != Format::sqlite)
            throw Error(ErrorKind::validation, "download_db conflicts with format=" + *format, "download_db");
        req.format = Format::sqlite;
    }
    db::resolve(f);  // validate early so errors name the field
    return req;
}

/// Serializes a query result the same way for the service and the CLI.
inline Response render(const db::QueryResult& result, const DefectsRequest& req) {
    switch (req.format) {
        case Format::csv: return {200, "text/csv; charset=utf-8", db::to_csv(result), {}};
        case Format::sqlite: {
            Response r{200, "application/vnd.sqlite3", db::to_sqlite_bytes(result), {}};
            r.headers["Content-Disposition"] = "attachment; filename=\"" + db::download_filename(req.filters) + "\"";
            return r;
        }
        case Format::json: break;
    }
    return {200, "application/json", db::to_json(result).dump(), {}};
}

class Service {
public:
    explicit Service(ServiceConfig cfg = {}) : cfg_(std::move(cfg)) {}

    const ServiceConfig& config() const noexcept { return cfg_; }

    /// Swaps in a new snapshot. In-flight requests keep the one they started with.
    void publish(std::shared_ptr<const db::Snapshot> snap) {
        auto p = std::make_shared<Published>();
        p->sqlite_bytes = db::export_sqlite_bytes(*snap);
        p->sha256 = sha256_hex(p->sqlite_bytes);
        p->snapshot = std::move(snap);
        std::lock_guard lock(mutex_);
        current_ = std::move(p);
    }

    /// Loads the configured SQLite file and publishes it.
    void load() { publish(std::make_shared<const db::Snapshot>(db::import_sqlite(cfg_.db_path))); }

    std::shared_ptr<const Published> current() const {
        std::lock_guard lock(mutex_);
        return current_;
    }

    Response get_db() const {
        auto p = current();
        if (!p) return error_response(503, "unavailable", "no database snapshot loaded");
        Response r{200, "application/vnd.sqlite3", p->sqlite_bytes, {}};
        r.headers["X-Checksum-SHA256"] = p->sha256;
        r.headers["ETag"] = "\"sha256-" + p->sha256 + "\"";
        r.headers["Content-Disposition"] =
            "attachment; filename=\"" + cfg_.db_path.filename().string() + "\"";
        return r;
    }

    Response get_defects(const Params& params) const {
        auto p = current();
        if (!p) return error_response(503, "unavailable", "no database snapshot loaded");
        try {
            auto req = parse_defects_request(params);
            return render(db::query(*p->snapshot, req.filters), req);
        } catch (const Error& e) {
            return error_response(e);
        }
    }

    /// Column names, keys and types in table order.
    Response get_schema() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& c : db::columns)
            j.push_back({{"name", std::string(c.name)},
                      {"key", std::string(c.key)},
                      {"type", std::string(db::sql_type(c.type))},
                      {"identity", c.identity}});
        return {200, "application/json", nlohmann::json{{"table", std::string(db::table_name)}, {"columns", j}}.dump(), {}};
    }

    /// Body: one request object, or {"items": [...]} for a batch. A request is either
    /// {"record_id": id, "n_D_new": n} (stored n_D assumed unless "n_D_old" is given) or
    /// {"E0": eV, "mu_sq": D², "n_D_old": n, "n_D_new": n} with optional "tau_old" (ns).
    Response post_rescale(const std::string& body) const {
        nlohmann::json in;
        try {
            in = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            return error_response(400, "parse", std::string("invalid JSON: ") + e.what());
        }
        auto p = current();
        try {
            if (!in.is_object()) throw Error(ErrorKind::validation, "request body must be a JSON object");
            if (in.contains("items")) {
                if (!in["items"].is_array()) throw Error(ErrorKind::validation, "items must be an array", "items");
                nlohmann::json out = nlohmann::json::array();
                for (std::size_t i = 0; i < in["items"].size(); ++i) {
                    try {
                        out.push_back(rescale_one(in["items"][i], p.get()));
                    } catch (const Error& e) {
                        auto r = error_response(e);
                        auto j = nlohmann::json::parse(r.body);
                        j["error"]["index"] = i;
                        r.body = j.dump();
                        return r;
                    }
                }
                return {200, "application/json", nlohmann::json{{"results", out}}.dump(), {}};
            }
            return {200, "application/json", rescale_one(in, p.get()).dump(), {}};
        } catch (const Error& e) {
            return error_response(e);
        }
    }

    /// Registers the routes and CORS handling on an httplib server.
    void mount(httplib::Server& server) const {
        auto send = [this](const httplib::Request& req, httplib::Response& res, Response r) {
            res.status = r.status;
            for (const auto& [k, v] : r.headers) res.set_header(k, v);
            apply_cors(req, res);
            res.set_content(std::move(r.body), r.content_type);
        };
        server.Get("/db", [this, send](const httplib::Request& req, httplib::Response& res) { send(req, res, get_db()); });
        server.Get("/api/v1/defects", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(req, res, get_defects(Params(req.params.begin(), req.params.end())));
        });
        server.Get("/api/v1/schema",
                   [this, send](const httplib::Request& req, httplib::Response& res) { send(req, res, get_schema()); });
        server.Post("/api/v1/lifetime/rescale", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(req, res, post_rescale(req.body));
        });
        server.Options(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
            apply_cors(req, res);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
    }

    /// Blocks until the server stops.
    bool listen(httplib::Server& server) const {
        mount(server);
        return server.listen(cfg_.host, cfg_.port);
    }

private:
    void apply_cors(const httplib::Request& req, httplib::Response& res) const {
        if (!req.has_header("Origin")) return;
        auto origin = req.get_header_value("Origin");
        for (const auto& o : cfg_.cors_origins)
            if (o == "*" || o == origin) {
                res.set_header("Access-Control-Allow-Origin", origin);
                res.set_header("Vary", "Origin");
                return;
            }
    }

    static double number_field(const nlohmann::json& j, const char* key) {
        const auto& v = j.at(key);
        if (!v.is_number()) throw Error(ErrorKind::validation, std::string(key) + " must be a number", key);
        return v.get<double>();
    }

    nlohmann::json rescale_one(const nlohmann::json& j, const Published* p) const {
        if (!j.is_object()) throw Error(ErrorKind::validation, "rescale request must be an object");
        for (const auto& [key, v] : j.items())
            if (key != "record_id" && key != "E0" && key != "mu_sq" && key != "n_D_old" && key != "tau_old" &&
                key != "n_D_new")
                throw Error(ErrorKind::validation, "unknown field '" + key + "'", key);
        if (!j.contains("n_D_new")) throw Error(ErrorKind::validation, "n_D_new is required", "n_D_new");
        double n_new = number_field(j, "n_D_new");
        double n_old = j.contains("n_D_old") ? number_field(j, "n_D_old") : cfg_.stored_refractive_index;
        if (!(n_old >= 1.0)) throw Error(ErrorKind::validation, "refractive index must be >= 1", "n_D_old");

        nlohmann::json out;
        RadiativeResult base;
        if (j.contains("record_id")) {
            if (!j["record_id"].is_number_integer())
                throw Error(ErrorKind::validation, "record_id must be an integer", "record_id");
            auto id = j["record_id"].get<std::int64_t>();
            if (!p) throw Error(ErrorKind::not_found, "no database snapshot loaded", "record_id");
            const auto* row = p->snapshot->find(id);
            if (!row) throw Error(ErrorKind::not_found, "record " + std::to_string(id) + " not found", "record_id");
            const auto& tau = row->record.real("lifetime");
            if (!tau) throw Error(ErrorKind::validation, "record " + std::to_string(id) + " has no lifetime", "record_id");
            base.lifetime_ns = *tau;
            base.rate_per_s = 1e9 / *tau;
            base.refractive_index = n_old;
            base.zpl_ev = row->record.real("ZPL").value_or(0.0);
            if (auto tdm = row->record.real("ems_tdm")) base.dipole_sq_debye2 = *tdm * *tdm;
            out["record_id"] = id;
        } else if (j.contains("tau_old")) {
            double tau = number_field(j, "tau_old");
            if (!(tau > 0.0)) throw Error(ErrorKind::validation, "tau_old must be positive", "tau_old");
            base.lifetime_ns = tau;
            base.rate_per_s = 1e9 / tau;
            base.refractive_index = n_old;
            if (j.contains("E0")) base.zpl_ev = number_field(j, "E0");
            if (j.contains("mu_sq")) base.dipole_sq_debye2 = number_field(j, "mu_sq");
        } else {
            if (!j.contains("E0") || !j.contains("mu_sq"))
                throw Error(ErrorKind::validation, "give record_id, tau_old, or both E0 and mu_sq", "E0");
            base = radiative_rate(number_field(j, "E0"), number_field(j, "mu_sq"), n_old);
        }
        auto next = rescale_lifetime(base, n_new);
        auto tau_json = [](double t) { return std::isfinite(t) ? nlohmann::json(t) : nlohmann::json(nullptr); };
        out["E0"] = base.zpl_ev;
        out["mu_sq"] = base.dipole_sq_debye2;
        out["n_D_old"] = base.refractive_index;
        out["n_D_new"] = next.refractive_index;
        out["tau_old"] = tau_json(base.lifetime_ns);
        out["tau_new"] = tau_json(next.lifetime_ns);
        out["rate_old"] = base.rate_per_s;
        out["rate_new"] = next.rate_per_s;
        out["infinite_lifetime"] = base.infinite_lifetime();
        return out;
    }

    ServiceConfig cfg_;
    mutable std::mutex mutex_;
    std::shared_ptr<const Published> current_;
};

}  // namespace hbndb::service
