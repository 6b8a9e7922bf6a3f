// Copyright 2026 The Contrastive Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Bundled word lists for number and person heuristics.

#pragma once

#include <string>
#include <unordered_set>

namespace contrastive::lexicon {

inline const std::unordered_set<std::string>& first_names() {
  static const std::unordered_set<std::string> names = {
      "aaron", "abby", "adam", "adrian", "aiden", "alan", "albert", "alex", "alexander", "alice",
      "alicia", "allison", "amanda", "amber", "amy", "andrea", "andrew", "angela", "ann", "anna",
      "anne", "anthony", "april", "austin", "barbara", "ben", "benjamin", "betty", "beth", "bill",
      "billy", "bob", "bobby", "brad", "brandon", "brenda", "brett", "brian", "brittany", "bruce",
      "bryan", "carl", "carla", "carlos", "carol", "caroline", "carrie", "catherine", "chad",
      "charles", "charlie", "chelsea", "chris", "christina", "christine", "christopher", "cindy",
      "claire", "cody", "colin", "craig", "crystal", "cynthia", "dan", "daniel", "danielle", "david",
      "dawn", "deborah", "debra", "denise", "dennis", "derek", "diana", "diane", "donald", "donna",
      "doris", "dorothy", "douglas", "dylan", "edward", "elena", "elizabeth", "ellen", "emily",
      "emma", "eric", "erica", "erin", "ethan", "eugene", "evan", "felicia", "frank", "gary",
      "george", "gerald", "gloria", "grace", "greg", "gregory", "hannah", "harold", "harry",
      "heather", "helen", "henry", "holly", "ian", "isaac", "jack", "jacob", "james", "jamie",
      "jane", "janet", "janice", "jason", "jeff", "jeffrey", "jennifer", "jeremy", "jerry", "jesse",
      "jessica", "jill", "joan", "joe", "joel", "john", "jon", "jonathan", "jordan", "jose",
      "joseph", "joshua", "joyce", "juan", "judith", "judy", "julia", "julie", "justin", "karen",
      "katherine", "kathleen", "kathryn", "kathy", "katie", "keith", "kelly", "kenneth", "kevin",
      "kim", "kimberly", "kyle", "larry", "laura", "lauren", "lawrence", "leah", "lee", "leslie",
      "lindsey", "linda", "lisa", "logan", "lori", "louis", "lucas", "lucy", "luis", "maria",
      "marie", "mark", "martha", "martin", "mary", "matthew", "megan", "melissa", "michael",
      "michelle", "mike", "monica", "nancy", "natalie", "nathan", "neil", "nicholas", "nick",
      "nicole", "noah", "olivia", "pamela", "patricia", "patrick", "paul", "peter", "philip",
      "rachel", "ralph", "randy", "rebecca", "robert", "robin", "roger", "ronald", "rose", "roy",
      "russell", "ruth", "ryan", "samantha", "samuel", "sandra", "sara", "sarah", "scott", "sean",
      "sharon", "shirley", "sophia", "stephanie", "stephen", "steve", "steven", "susan", "tammy",
      "taylor", "terry", "thomas", "tiffany", "timothy", "tina", "todd", "tom", "tony", "tracy",
      "travis", "tyler", "valerie", "victoria", "vincent", "virginia", "walter", "wayne",
      "wendy", "william", "zachary"};
  return names;
}

/// Plurals that do not end in "s".
inline const std::unordered_set<std::string>& irregular_plurals() {
  static const std::unordered_set<std::string> words = {
      "alumni",  "bacteria", "cacti",  "cattle", "children", "criteria", "data",     "dice",
      "feet",    "fungi",    "geese",  "lice",   "media",    "men",      "mice",     "oxen",
      "people",  "phenomena", "police", "teeth", "women",    "deer",     "sheep",    "fish"};
  return words;
}

/// Singular nouns ending in "s" that the suffix rules below would miss.
inline const std::unordered_set<std::string>& singular_exceptions() {
  static const std::unordered_set<std::string> words = {
      "atlas", "bias",    "canvas",   "chaos",  "gas",     "lens",    "mathematics", "news",
      "physics", "series", "species", "sous",   "pancreas", "yes",   "this",        "iris",
      "measles", "economics", "politics", "ethics", "thermos", "christmas", "hummus", "molasses"};
  return words;
}

/// Mass nouns; counted as grammatically singular.
inline const std::unordered_set<std::string>& mass_nouns() {
  static const std::unordered_set<std::string> words = {
      "water", "rice", "sand", "milk", "oil", "flour", "sugar", "salt", "butter", "bread",
      "furniture", "information", "equipment", "luggage", "money", "air", "soil", "dirt", "wood"};
  return words;
}

/// Singular words ending in "men" (so the "-men" plural rule skips them).
inline const std::unordered_set<std::string>& men_singulars() {
  static const std::unordered_set<std::string> words = {"abdomen", "omen", "specimen", "stamen",
                                                        "semen", "hymen", "regimen", "amen"};
  return words;
}

}  // namespace contrastive::lexicon
