#pragma once

#include <string_view>

// Data files compiled into the library (see cmake/EmbedData.cmake).
namespace dt::embedded {

std::string_view counters_tsv();
std::string_view counter_classes_tsv();
std::string_view en_ui_json();
std::string_view en_kana_tsv();

}  // namespace dt::embedded
