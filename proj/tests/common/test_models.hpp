#pragma once

// Shared model documents for the test suites. All of these have closed-form
// or hand-checked behavior that the tests pin down.

#include <string>

#include "json.hpp"

namespace testmodels {

using nlohmann::json;

// b = 0, a(x,1) = 1 + x^4, a(x,2) = 1: classified not Feller-Dynkin because
// env 1 has a convergent u/a tail integral (= pi/4) while the chain keeps
// mixing both environments.
inline json quartic() {
    return json{{"dimension", 1},
                {"environments", 2},
                {"drift", json::array({json::array({"0"}), json::array({"0"})})},
                {"diffusion", json::array({json::array({json::array({"1 + x1^4"})}),
                                           json::array({json::array({"1"})})})},
                {"qmatrix",
                 {{"type", "dense"},
                  {"rates", json::array({json::array({-1, 1}), json::array({1, -1})})}}},
                {"sampling_box", json::array({json::array({-10, 10})})}};
}

// Two-environment Brownian motion (identical envs, unit diffusion).
inline json brownian2() {
    return json{{"dimension", 1},
                {"environments", 2},
                {"drift", json::array({json::array({"0"}), json::array({"0"})})},
                {"diffusion", json::array({json::array({json::array({"1"})}),
                                           json::array({json::array({"1"})})})},
                {"qmatrix",
                 {{"type", "dense"},
                  {"rates", json::array({json::array({-1, 1}), json::array({1, -1})})}}},
                {"sampling_box", json::array({json::array({-10, 10})})}};
}

// Two-environment Ornstein-Uhlenbeck (b = -x, a = 1 in both envs).
inline json switching_ou() {
    return json{{"dimension", 1},
                {"environments", 2},
                {"drift", json::array({json::array({"-x1"}), json::array({"-x1"})})},
                {"diffusion", json::array({json::array({json::array({"1"})}),
                                           json::array({json::array({"1"})})})},
                {"qmatrix",
                 {{"type", "dense"},
                  {"rates", json::array({json::array({-1, 1}), json::array({1, -1})})}}},
                {"sampling_box", json::array({json::array({-25, 25})})}};
}

// Single-environment d-dimensional Brownian motion.
inline json brownian_nd(int d) {
    json drift_row = json::array();
    json diff_row = json::array();
    for (int r = 0; r < d; ++r) {
        drift_row.push_back("0");
        json arow = json::array();
        for (int c = 0; c < d; ++c) arow.push_back(r == c ? "1" : "0");
        diff_row.push_back(arow);
    }
    json box = json::array();
    for (int r = 0; r < d; ++r) box.push_back(json::array({-5, 5}));
    return json{{"dimension", d},
                {"environments", 1},
                {"drift", json::array({drift_row})},
                {"diffusion", json::array({diff_row})},
                {"qmatrix", {{"type", "dense"}, {"rates", json::array({json::array({0})})}}},
                {"sampling_box", box}};
}

// a(u) = (1 + u^2) log(2 + u^2): the u/a tail behaves like 1/(u log u), whose
// truncation ladder neither plateaus nor grows cleanly, so every integral
// test stays inconclusive.
inline json borderline_log() {
    return json{{"dimension", 1},
                {"environments", 2},
                {"drift", json::array({json::array({"0"}), json::array({"0"})})},
                {"diffusion",
                 json::array({json::array({json::array({"(1 + x1^2) * log(2 + x1^2)"})}),
                              json::array({json::array({"1"})})})},
                {"qmatrix",
                 {{"type", "dense"},
                  {"rates", json::array({json::array({-1, 1}), json::array({1, -1})})}}},
                {"sampling_box", json::array({json::array({-10, 10})})}};
}

// State-dependent switching with constant rate expressions equal to the dense
// rates of switching_ou(); used for the cross-simulator comparison.
inline json switching_ou_statedep() {
    return json{
        {"dimension", 1},
        {"environments", 2},
        {"drift", json::array({json::array({"-x1"}), json::array({"-x1"})})},
        {"diffusion", json::array({json::array({json::array({"1"})}),
                                   json::array({json::array({"1"})})})},
        {"qmatrix",
         {{"type", "state_dependent"},
          {"rates", json::array({json::array({"-1", "1"}), json::array({"1", "-1"})})}}},
        {"sampling_box", json::array({json::array({-25, 25})})}};
}

}  // namespace testmodels
