#include "triage/lexicon.hpp"

#include <algorithm>
#include <span>
#include <array>
#include <set>
#include <string_view>

namespace triage {

namespace {

// Roots are expanded with suffix variants to reach >= 200 terms per team.
constexpr std::string_view kEdRoots[] = {
    "anorexia",   "bulimia",     "binge",       "purging",     "restriction", "bmi",
    "underweight", "calorie",    "vomiting",    "laxative",    "refeeding",   "electrolyte",
    "bradycardia", "amenorrhoea", "dietitian",  "mealplan",    "weighing",    "fasting",
    "overexercise", "compensatory", "arfid",    "satiety",     "hypokalaemia", "lanugo",
    "emaciation", "malnutrition", "orthorexia", "bodyweight",  "appetite",    "dieting",
    "snacking",   "bloating",    "nutrition",   "marsipan",    "edeq",        "starvation",
    "thinness",   "purge",       "ketosis",     "hypoglycaemia", "dehydration", "bodycheck",
    "mealtime",   "portion",     "weightgain",  "foodlog",     "caloriecount", "gastric"};

constexpr std::string_view kIdRoots[] = {
    "autism",      "learning",    "disability",  "makaton",     "widget",      "communication",
    "sensory",     "meltdown",    "carer",       "supported",   "living",      "iq",
    "cognitive",   "adaptive",    "epilepsy",    "downs",       "fragile",     "challenging",
    "behaviour",   "pbs",         "easyread",    "signing",     "nonverbal",   "stimming",
    "selfinjury",  "routine",     "daycentre",   "respite",     "capacity",    "advocacy",
    "bestinterest", "deprivation", "dols",       "hospitalpassport", "keyworker", "mencap",
    "echcp",       "transition",  "sen",         "dyspraxia",   "autistic",    "asd",
    "adhd",        "pica",        "echolalia",   "speechtherapy", "visualschedule", "occupational"};

constexpr std::string_view kOaRoots[] = {
    "dementia",    "memory",      "alzheimers",  "frailty",     "falls",       "mmse",
    "moca",        "ace",         "delirium",    "confusion",   "wandering",   "sundowning",
    "donepezil",   "memantine",   "rivastigmine", "vascular",   "lewy",        "frontotemporal",
    "carehome",    "nursinghome", "retired",     "widowed",     "pension",     "mobility",
    "walkingframe", "hearingaid", "cataract",    "incontinence", "osteoporosis", "parkinsons",
    "stroke",      "ageing",      "elderly",     "geriatric",   "octogenarian", "nonagenarian",
    "grandchildren", "reminiscence", "orientation", "forgetful", "misplacing",  "cognition",
    "atrophy",     "ctscan",      "homecare",    "lpa",         "bereavement", "latelife"};

constexpr std::string_view kEipRoots[] = {
    "psychosis",   "hallucination", "voices",    "paranoia",    "delusion",    "persecutory",
    "schizophrenia", "antipsychotic", "clozapine", "risperidone", "aripiprazole", "olanzapine",
    "prodromal",   "firstepisode", "thoughtdisorder", "disorganised", "negativesymptoms", "catatonia",
    "cannabis",    "skunk",       "insight",     "grandiose",   "telepathy",   "ideasofreference",
    "thoughtbroadcast", "passivity", "command",   "auditory",    "visual",      "bizarre",
    "withdrawn",   "flataffect",  "poverty",     "suspicious",  "surveillance", "implanted",
    "depot",       "panss",       "duration",    "untreated",   "dup",         "arms",
    "relapse",     "earlyintervention", "psychotic", "mania",     "pressured",   "tangential"};

constexpr std::string_view kPnRoots[] = {
    "pregnancy",   "pregnant",    "antenatal",   "postnatal",   "perinatal",   "postpartum",
    "midwife",     "obstetric",   "gestation",   "trimester",   "baby",        "infant",
    "newborn",     "breastfeeding", "bonding",   "attachment",  "puerperal",   "labour",
    "caesarean",   "birth",       "delivery",    "miscarriage", "stillbirth",  "neonatal",
    "healthvisitor", "epds",      "motherhood",  "maternity",   "conception",  "ivf",
    "fetal",       "scan",        "edd",         "lactation",   "nappy",       "feeding",
    "motherandbaby", "mbu",       "tokophobia",  "preeclampsia", "hyperemesis", "childbirth",
    "newmother",   "postnatally", "antenatally", "gravida",     "parity",      "weeks"};

constexpr std::string_view kSuffixes[] = {"", "s", "ing", "ed", "al", "ic", "ness", "ity"};

constexpr std::string_view kFiller[] = {
    "the",       "a",          "and",        "of",         "to",         "in",         "with",
    "was",       "is",         "for",        "on",         "at",         "by",         "from",
    "has",       "had",        "have",       "be",         "been",       "not",        "no",
    "any",       "some",       "this",       "that",       "they",       "their",      "she",
    "he",        "her",        "his",        "patient",    "client",     "seen",       "today",
    "reviewed",  "review",     "appointment", "clinic",    "telephone",  "phone",      "call",
    "letter",    "email",      "discussed",  "plan",       "agreed",     "follow",     "up",
    "next",      "week",       "month",      "team",       "referral",   "referred",   "gp",
    "surgery",   "mood",       "sleep",      "low",        "stable",     "settled",    "calm",
    "anxious",   "engaged",    "pleasant",   "cooperative", "rapport",   "eye",        "contact",
    "speech",    "normal",     "rate",       "volume",     "tone",       "thoughts",   "content",
    "risk",      "denies",     "reports",    "describes",  "feels",      "feeling",    "said",
    "family",    "mother",     "father",     "partner",    "sister",     "brother",    "friend",
    "home",      "visit",      "attended",   "did",        "attend",     "cancelled",  "rebooked",
    "medication", "dose",      "prescribed", "taking",     "compliance", "side",       "effects",
    "support",   "worker",     "nurse",      "doctor",     "psychologist", "therapist", "admin",
    "notes",     "record",     "updated",    "summary",    "meeting",    "mdt",        "discussion",
    "assessment", "history",   "background", "presenting", "complaint",  "current",    "previous",
    "concerns",  "raised",     "safeguarding", "consent",  "outcome",  "diet",       "exercise",
    "work",      "school",     "college",    "housing",    "benefits",   "finances",   "debt",
    "alcohol",   "smoking",    "physical",   "health",     "bloods",     "ecg",        "weight",
    "height",    "pulse",      "bp",         "observations", "unremarkable", "change", "overall",
    "well",      "unwell",     "better",     "worse",      "same",       "since",      "last",
    "time",      "day",        "morning",    "evening",    "night",      "during",     "after",
    "before",    "about",      "also",       "further",    "again",      "will",       "would",
    "could",     "should",     "may",        "might",      "need",       "needs"};

std::vector<std::string> build_team(std::span<const std::string_view> roots) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::string_view suffix : kSuffixes) {
    for (std::string_view root : roots) {
      std::string term = std::string(root) + std::string(suffix);
      if (seen.insert(term).second) out.push_back(std::move(term));
    }
  }
  return out;
}

struct Lexicons {
  std::array<std::vector<std::string>, kTeamCount> teams;
  std::vector<std::string> filler;

  Lexicons() {
    teams[0] = build_team(kEdRoots);
    teams[1] = build_team(kIdRoots);
    teams[2] = build_team(kOaRoots);
    teams[3] = build_team(kEipRoots);
    teams[4] = build_team(kPnRoots);

    std::set<std::string> filler_set;
    for (std::string_view w : kFiller) {
      if (filler_set.insert(std::string(w)).second) filler.emplace_back(w);
    }

    // Enforce disjointness: a term claimed by two sources is removed from all.
    std::set<std::string> claimed(filler_set);
    std::set<std::string> clashes;
    for (const auto& lex : teams) {
      for (const auto& term : lex) {
        if (!claimed.insert(term).second) clashes.insert(term);
      }
    }
    for (auto& lex : teams) {
      std::erase_if(lex, [&](const std::string& t) { return clashes.count(t) > 0; });
    }
    std::erase_if(filler, [&](const std::string& t) { return clashes.count(t) > 0; });
  }
};

const Lexicons& lexicons() {
  static const Lexicons instance;
  return instance;
}

}  // namespace

const std::vector<std::string>& team_lexicon(Team team) {
  return lexicons().teams[static_cast<std::size_t>(team_index(team))];
}

const std::vector<std::string>& filler_lexicon() { return lexicons().filler; }

}  // namespace triage
