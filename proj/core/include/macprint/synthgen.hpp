// synthgen.hpp
//
// Deterministic multi-user traffic generator.  A Scenario describes apps
// (with per-action traffic shapes and the screen button that triggers each
// action), users (app/action preferences, usage sessions, MAC rotation) and
// capture-wide noise.  generate_scenario() turns it into a capture, one
// interaction log per user and a GroundTruth that the pipeline under test
// never reads.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "macprint/trace_model.hpp"

namespace macprint {

struct Gaussian {
    double mean = 0.0;
    double stddev = 0.0;
    bool operator==(const Gaussian &) const = default;
};

struct ActionProfile {
    std::string name;
    double uplink_rate = 5.0;     ///< frames per second
    double downlink_rate = 5.0;
    Gaussian uplink_size{200, 20};    ///< bytes, clamped to [1, 1500]
    Gaussian downlink_size{800, 80};
    Gaussian duration{8, 2};      ///< seconds, floored at min_action_duration
    double burstiness = 1.0;      ///< squared CV of inter-arrival gaps (1 = Poisson)
    Rect button;                  ///< tap area that triggers this action

    bool operator==(const ActionProfile &) const = default;
};

struct AppProfile {
    std::string name;             ///< package name as written to interaction logs
    std::string category;
    double background_rate = 0.3; ///< frames per second while idle
    std::vector<ActionProfile> actions;

    bool operator==(const AppProfile &) const = default;
};

struct Preference {
    std::size_t app = 0;
    std::size_t action = 0;
    double weight = 0.0;
    bool operator==(const Preference &) const = default;
};

struct UsageSession {
    double start = 0.0;
    double length = 0.0;
    int app = -1;  ///< restrict the session to one app; -1 follows preferences
    bool operator==(const UsageSession &) const = default;
};

struct UserScript {
    std::string name;
    std::vector<Preference> preferences;   ///< weights sum to 1
    std::vector<UsageSession> sessions;
    double mac_rotation_period = 86400.0;  ///< seconds

    bool operator==(const UserScript &) const = default;
};

struct Scenario {
    std::uint64_t seed = 1;
    double horizon = 600.0;
    MacAddress ap{{0x02, 0x00, 0x00, 0x00, 0x00, 0x01}};
    double mgmt_fraction = 0.0;      ///< share of all frames that are beacons
    double ctrl_fraction = 0.0;      ///< share of all frames that are control frames
    double foreign_fraction = 0.0;   ///< share of data frames belonging to another BSS
    double tap_interval = 0.5;       ///< seconds between taps while an action runs
    double background_pad = 60.0;    ///< idle presence around each usage session
    double min_action_duration = 0.5;
    std::vector<AppProfile> apps;
    std::vector<UserScript> users;

    /// throws Error describing the first violated constraint
    void validate() const;
    ActionMappingTable mapping_table() const;
    std::vector<std::string> app_names() const;

    bool operator==(const Scenario &) const = default;
};

struct FrameTruth {
    int user = -1;     ///< -1 for AP-originated noise
    int app = -1;
    int action = -1;   ///< -1 for background traffic
    int session = -1;
};

struct SessionTruth {
    int id = 0;
    int user = 0;
    int app = 0;
    int action = 0;
    double start = 0.0;
    double end = 0.0;
    std::size_t taps = 0;
};

struct PseudonymTruth {
    MacAddress mac;
    int user = 0;
    double from = 0.0;
    double to = 0.0;
};

struct GroundTruth {
    std::vector<FrameTruth> frames;  ///< parallel to capture rows
    std::vector<SessionTruth> sessions;
    std::vector<PseudonymTruth> pseudonyms;
    std::size_t tap_count = 0;

    int user_of(const MacAddress &mac) const;
};

struct GeneratedScenario {
    std::vector<FrameMeta> capture;
    std::vector<std::vector<InteractionRecord>> logs;  ///< one per user
    GroundTruth truth;
};

GeneratedScenario generate_scenario(const Scenario &scenario);

/// drops each frame independently with probability `rate`; frame ids are kept
std::vector<FrameMeta> inject_loss(std::span<const FrameMeta> capture, double rate, std::uint64_t seed);

/// locally administered pseudonym of `user` during rotation epoch `epoch`
MacAddress pseudonym_mac(std::uint64_t seed, std::size_t user, std::uint64_t epoch);

// scenario text format and artifact writers (scenario_io.cpp)

Scenario parse_scenario(std::istream &in, const std::string &source = "<scenario>");
Scenario load_scenario(const std::filesystem::path &path);
void write_scenario(std::ostream &out, const Scenario &scenario);

void write_interaction_log(std::ostream &out, std::span<const InteractionRecord> records);
void write_ground_truth(std::ostream &out, const GroundTruth &truth, std::span<const FrameMeta> capture);
GroundTruth read_ground_truth(std::istream &in);

/// controlled-collection registry: which user's log belongs to which MAC
struct DeviceRegistry {
    std::vector<std::pair<MacAddress, std::size_t>> entries;  ///< (mac, user index)
    std::vector<std::string> users;
};
DeviceRegistry device_registry(const Scenario &scenario, const GroundTruth &truth);
void write_device_registry(std::ostream &out, const DeviceRegistry &registry);
DeviceRegistry read_device_registry(std::istream &in, const std::string &source = "<devices>");

/// writes scenario.txt, capture.csv, logs/<user>.log, devices.txt and
/// truth.jsonl into `dir`
void write_generated(const std::filesystem::path &dir, const Scenario &scenario, const GeneratedScenario &gen);

// presets

struct CatalogOptions {
    std::size_t apps = 10;
    std::size_t actions_per_app = 4;
    std::uint64_t seed = 11;
    std::size_t novel_from = SIZE_MAX;  ///< apps from this index on get an out-of-range signature
};

/// apps spread round-robin over messaging, social, video, music, shopping
std::vector<AppProfile> default_catalog(const CatalogOptions &opts = {});

struct InstancePlan {
    std::size_t instances_per_app = 6;
    double instance_length = 120.0;
    double idle_gap = 40.0;
};

/// one collector device running every app in turn, like a lab capture
Scenario catalog_scenario(std::vector<AppProfile> apps, const InstancePlan &plan, std::uint64_t seed);

struct RoomPlan {
    std::size_t users = 3;
    std::size_t days = 5;
    std::size_t sessions_per_day = 3;
    double session_length = 150.0;
    double day_length = 86400.0;
    double primary_share = 0.9;  ///< preference mass on the user's signature app
    std::size_t first_primary_app = 0;
    std::size_t known_apps = 8;  ///< primaries drawn from apps [0, known_apps)
};

/// users sharing one AP with daily MAC rotation
Scenario room_scenario(std::vector<AppProfile> apps, const RoomPlan &plan, MacAddress ap, std::uint64_t seed);

}  // namespace macprint
