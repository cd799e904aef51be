#pragma once

// Shared test fixtures: dataset-shaped schemas for the COVID/PhysioNet and
// ESRD pairings, and small CSV helpers.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "covidcare/schema.hpp"

namespace fixtures {

inline const std::vector<std::string>& covid_physionet_shared() {
    static const std::vector<std::string> names = {
        "Hs-cTnI",      "Hemoglobin",  "Serum chloride", "Alkaline phosphatase",
        "Total bilirubin", "Creatinine", "Hematocrit",   "WBC",
        "Fibrinogen",   "Urea",        "PH value",       "Serum potassium",
        "Glucose",      "Direct bilirubin", "HCO3-",     "Calcium",
        "aPTT"};
    return names;
}

// 33 features: 17 shared + 16 private vitals/labs.
inline covidcare::FeatureSchema physionet_schema() {
    covidcare::FeatureSchema s;
    for (const auto& n : covid_physionet_shared()) s.add(n);
    for (const char* n :
         {"Heart rate", "Pulse oximetry", "Temperature", "Systolic BP", "MAP", "Platelet count",
          "Diastolic BP", "Respiration rate", "EtCO2", "Excess HCO3", "FiO2", "PaCO2", "SaO2",
          "AST", "Lactic acid", "Phosphate"})
        s.add(n, covidcare::FeatureKind::vital);
    return s;
}

// 74 features: the same 17 shared + 57 private labs.
inline covidcare::FeatureSchema covid_schema() {
    covidcare::FeatureSchema s;
    for (const auto& n : covid_physionet_shared()) s.add(n);
    for (const char* n :
         {"Gamma-GT", "Procalcitonin", "Albumin", "HBsAg", "Globulin", "HsCRP", "Serum sodium",
          "Red blood cell count", "Nucleic acid detection", "Monocytes", "Antithrombin",
          "Total protein", "HCV-AQ", "Total cholesterol", "Lactate dehydrogenase", "HIV-AQ"})
        s.add(n);
    for (int i = 1; i <= 41; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "covid_extra_%02d", i);
        s.add(buf);
    }
    return s;
}

// 17 features; 8 share names with the PhysioNet schema directly, 3 more
// align through aliases (chloride, potassium, WBC count).
inline covidcare::FeatureSchema esrd_schema() {
    covidcare::FeatureSchema s;
    for (const char* n : {"Systolic BP", "Diastolic BP", "Urea", "Calcium", "Chloride",
                          "Creatinine", "Glucose", "Phosphate", "Potassium", "Hemoglobin",
                          "WBC Count"})
        s.add(n);
    for (const char* n : {"Sodium", "CO2CP", "Albumin", "hs-CRP", "Weight", "Amount"}) s.add(n);
    return s;
}

inline covidcare::AliasTable esrd_aliases() {
    return {{"chloride", "serum chloride"},
            {"potassium", "serum potassium"},
            {"wbc count", "wbc"}};
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace fixtures
