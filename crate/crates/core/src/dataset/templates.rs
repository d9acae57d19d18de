// SPDX-License-Identifier: MIT OR Apache-2.0

//! The eight sentence templates and their word inventories.
//!
//! Each template instantiates an affirmative prefix, a negated prefix and a
//! shared target continuation. The target is always the final content word
//! after the polarity site (`"Alice can"` / `"Alice cannot"` + `" jump"`).
//! Only the negation cue differs between the prefixes, plus the auxiliary or
//! article it replaces and the verb inflection do-support requires
//! (`"likes"` → `"does not like"`, `"has a"` → `"has no"`).
//!
//! | template         | forms                           |
//! |------------------|---------------------------------|
//! | `capital_of`     | not, never                      |
//! | `can_ability`    | never, does_not, doesnt, cannot, cant |
//! | `likes`          | does_not, doesnt, never         |
//! | `is_a_job`       | not, never, no                  |
//! | `color_is`       | not, never                      |
//! | `has_object`     | does_not, doesnt, never, no     |
//! | `in_container`   | not, never, no                  |
//! | `drives_vehicle` | does_not, doesnt, never         |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NegationForm;
use crate::error::{Error, Result};

/// Template identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    CapitalOf,
    CanAbility,
    Likes,
    IsAJob,
    ColorIs,
    HasObject,
    InContainer,
    DrivesVehicle,
}

impl TemplateName {
    pub const ALL: [TemplateName; 8] = [
        Self::CapitalOf,
        Self::CanAbility,
        Self::Likes,
        Self::IsAJob,
        Self::ColorIs,
        Self::HasObject,
        Self::InContainer,
        Self::DrivesVehicle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CapitalOf => "capital_of",
            Self::CanAbility => "can_ability",
            Self::Likes => "likes",
            Self::IsAJob => "is_a_job",
            Self::ColorIs => "color_is",
            Self::HasObject => "has_object",
            Self::InContainer => "in_container",
            Self::DrivesVehicle => "drives_vehicle",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown template {s:?}")))
    }
}

/// Which surface word is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSlot {
    /// The object word (capital city, ability verb, job, color, container...).
    Object,
}

/// Indices into a template's vocab lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fillers {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
}

/// One instantiated pair of prefixes with their shared target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub affirmative_prefix: String,
    pub negated_prefix: String,
    pub target: String,
}

/// A sentence template with its word inventory.
#[derive(Debug, Clone)]
pub struct Template {
    pub name: TemplateName,
    pub forms: &'static [NegationForm],
    pub subject_vocab: &'static [&'static str],
    /// Frame variants (e.g. "The capital of X is" / "X's capital is").
    pub relation_vocab: &'static [&'static str],
    pub object_vocab: &'static [&'static str],
    pub target_slot: TargetSlot,
}

use NegationForm::*;

const COPULAR_FORMS: &[NegationForm] = &[Not, Never];
const CAN_FORMS: &[NegationForm] = &[Never, DoesNot, Doesnt, Cannot, Cant];
const VERB_FORMS: &[NegationForm] = &[DoesNot, Doesnt, Never];
const NOMINAL_FORMS: &[NegationForm] = &[Not, Never, No];
const POSSESSION_FORMS: &[NegationForm] = &[DoesNot, Doesnt, Never, No];

const NAMES: &[&str] = &[
    "Alice", "Bob", "Carol", "David", "Emma", "Frank", "Grace", "Henry", "Irene", "Jack",
    "Karen", "Laura", "Michael", "Nancy", "Oliver", "Paul", "Rachel", "Sarah", "Thomas",
    "Victor", "William", "Anna", "Brian", "Chris", "Daniel", "Ethan", "Fiona", "George",
    "Hannah", "Ian", "James", "Kevin", "Linda", "Mark", "Nina", "Peter", "Robert", "Simon",
    "Tony", "Zoe",
];

/// `(country, capital)`; countries that need a leading article are left out.
const COUNTRIES: &[(&str, &str)] = &[
    ("Afghanistan", "Kabul"),
    ("Albania", "Tirana"),
    ("Algeria", "Algiers"),
    ("Andorra", "Andorra la Vella"),
    ("Angola", "Luanda"),
    ("Argentina", "Buenos Aires"),
    ("Armenia", "Yerevan"),
    ("Australia", "Canberra"),
    ("Austria", "Vienna"),
    ("Azerbaijan", "Baku"),
    ("Bahrain", "Manama"),
    ("Bangladesh", "Dhaka"),
    ("Barbados", "Bridgetown"),
    ("Belarus", "Minsk"),
    ("Belgium", "Brussels"),
    ("Belize", "Belmopan"),
    ("Benin", "Porto-Novo"),
    ("Bhutan", "Thimphu"),
    ("Bolivia", "Sucre"),
    ("Bosnia and Herzegovina", "Sarajevo"),
    ("Botswana", "Gaborone"),
    ("Brazil", "Brasilia"),
    ("Brunei", "Bandar Seri Begawan"),
    ("Bulgaria", "Sofia"),
    ("Burkina Faso", "Ouagadougou"),
    ("Burundi", "Gitega"),
    ("Cambodia", "Phnom Penh"),
    ("Cameroon", "Yaounde"),
    ("Canada", "Ottawa"),
    ("Cape Verde", "Praia"),
    ("Chad", "N'Djamena"),
    ("Chile", "Santiago"),
    ("China", "Beijing"),
    ("Colombia", "Bogota"),
    ("Comoros", "Moroni"),
    ("Costa Rica", "San Jose"),
    ("Croatia", "Zagreb"),
    ("Cuba", "Havana"),
    ("Cyprus", "Nicosia"),
    ("Czechia", "Prague"),
    ("Denmark", "Copenhagen"),
    ("Djibouti", "Djibouti"),
    ("Dominica", "Roseau"),
    ("East Timor", "Dili"),
    ("Ecuador", "Quito"),
    ("Egypt", "Cairo"),
    ("El Salvador", "San Salvador"),
    ("Equatorial Guinea", "Malabo"),
    ("Eritrea", "Asmara"),
    ("Estonia", "Tallinn"),
    ("Eswatini", "Mbabane"),
    ("Ethiopia", "Addis Ababa"),
    ("Fiji", "Suva"),
    ("Finland", "Helsinki"),
    ("France", "Paris"),
    ("Gabon", "Libreville"),
    ("Georgia", "Tbilisi"),
    ("Germany", "Berlin"),
    ("Ghana", "Accra"),
    ("Greece", "Athens"),
    ("Guatemala", "Guatemala City"),
    ("Guinea", "Conakry"),
    ("Guinea-Bissau", "Bissau"),
    ("Guyana", "Georgetown"),
    ("Haiti", "Port-au-Prince"),
    ("Honduras", "Tegucigalpa"),
    ("Hungary", "Budapest"),
    ("Iceland", "Reykjavik"),
    ("India", "New Delhi"),
    ("Indonesia", "Jakarta"),
    ("Iran", "Tehran"),
    ("Iraq", "Baghdad"),
    ("Ireland", "Dublin"),
    ("Israel", "Jerusalem"),
    ("Italy", "Rome"),
    ("Ivory Coast", "Yamoussoukro"),
    ("Jamaica", "Kingston"),
    ("Japan", "Tokyo"),
    ("Jordan", "Amman"),
    ("Kazakhstan", "Astana"),
    ("Kenya", "Nairobi"),
    ("Kiribati", "Tarawa"),
    ("Kosovo", "Pristina"),
    ("Kuwait", "Kuwait City"),
    ("Kyrgyzstan", "Bishkek"),
    ("Laos", "Vientiane"),
    ("Latvia", "Riga"),
    ("Lebanon", "Beirut"),
    ("Lesotho", "Maseru"),
    ("Liberia", "Monrovia"),
    ("Libya", "Tripoli"),
    ("Liechtenstein", "Vaduz"),
    ("Lithuania", "Vilnius"),
    ("Luxembourg", "Luxembourg"),
    ("Madagascar", "Antananarivo"),
    ("Malawi", "Lilongwe"),
    ("Malaysia", "Kuala Lumpur"),
    ("Mali", "Bamako"),
    ("Malta", "Valletta"),
    ("Mauritania", "Nouakchott"),
    ("Mauritius", "Port Louis"),
    ("Mexico", "Mexico City"),
    ("Micronesia", "Palikir"),
    ("Moldova", "Chisinau"),
    ("Monaco", "Monaco"),
    ("Mongolia", "Ulaanbaatar"),
    ("Montenegro", "Podgorica"),
    ("Morocco", "Rabat"),
    ("Mozambique", "Maputo"),
    ("Myanmar", "Naypyidaw"),
    ("Namibia", "Windhoek"),
    ("Nauru", "Yaren"),
    ("Nepal", "Kathmandu"),
    ("New Zealand", "Wellington"),
    ("Nicaragua", "Managua"),
    ("Niger", "Niamey"),
    ("Nigeria", "Abuja"),
    ("North Korea", "Pyongyang"),
    ("North Macedonia", "Skopje"),
    ("Norway", "Oslo"),
    ("Oman", "Muscat"),
    ("Pakistan", "Islamabad"),
    ("Palau", "Ngerulmud"),
    ("Panama", "Panama City"),
    ("Papua New Guinea", "Port Moresby"),
    ("Paraguay", "Asuncion"),
    ("Peru", "Lima"),
    ("Poland", "Warsaw"),
    ("Portugal", "Lisbon"),
    ("Qatar", "Doha"),
    ("Romania", "Bucharest"),
    ("Russia", "Moscow"),
    ("Rwanda", "Kigali"),
    ("Saint Lucia", "Castries"),
    ("Samoa", "Apia"),
    ("San Marino", "San Marino"),
    ("Sao Tome and Principe", "Sao Tome"),
    ("Saudi Arabia", "Riyadh"),
    ("Senegal", "Dakar"),
    ("Serbia", "Belgrade"),
    ("Seychelles", "Victoria"),
    ("Sierra Leone", "Freetown"),
    ("Singapore", "Singapore"),
    ("Slovakia", "Bratislava"),
    ("Slovenia", "Ljubljana"),
    ("Somalia", "Mogadishu"),
    ("South Africa", "Pretoria"),
    ("South Korea", "Seoul"),
    ("South Sudan", "Juba"),
    ("Spain", "Madrid"),
    ("Sri Lanka", "Colombo"),
    ("Sudan", "Khartoum"),
    ("Suriname", "Paramaribo"),
    ("Sweden", "Stockholm"),
    ("Switzerland", "Bern"),
    ("Syria", "Damascus"),
    ("Taiwan", "Taipei"),
    ("Tajikistan", "Dushanbe"),
    ("Tanzania", "Dodoma"),
    ("Thailand", "Bangkok"),
    ("Togo", "Lome"),
    ("Tonga", "Nuku'alofa"),
    ("Trinidad and Tobago", "Port of Spain"),
    ("Tunisia", "Tunis"),
    ("Turkey", "Ankara"),
    ("Turkmenistan", "Ashgabat"),
    ("Tuvalu", "Funafuti"),
    ("Uganda", "Kampala"),
    ("Ukraine", "Kyiv"),
    ("Uruguay", "Montevideo"),
    ("Uzbekistan", "Tashkent"),
    ("Vanuatu", "Port Vila"),
    ("Venezuela", "Caracas"),
    ("Vietnam", "Hanoi"),
    ("Yemen", "Sanaa"),
    ("Zambia", "Lusaka"),
    ("Zimbabwe", "Harare"),
];

const COUNTRY_NAMES: &[&str] = &{
    let mut out = [""; COUNTRIES.len()];
    let mut i = 0;
    while i < COUNTRIES.len() {
        out[i] = COUNTRIES[i].0;
        i += 1;
    }
    out
};

const CAPITALS: &[&str] = &{
    let mut out = [""; COUNTRIES.len()];
    let mut i = 0;
    while i < COUNTRIES.len() {
        out[i] = COUNTRIES[i].1;
        i += 1;
    }
    out
};

/// `{C}` is replaced by the country name.
const CAPITAL_FRAMES: &[&str] = &[
    "The capital of {C} is",
    "{C}'s capital is",
    "The capital city of {C} is",
    "{C}'s capital city is",
    "The national capital of {C} is",
];

const ABILITIES: &[&str] = &[
    "swim", "jump", "dance", "sing", "cook", "drive", "read", "write", "fly", "climb", "ski",
    "skate", "paint", "draw", "run", "juggle", "knit", "sew", "whistle", "surf", "dive", "sail",
    "type", "fish", "ride", "row", "box", "fence", "skip", "spell",
];

const LIKED: &[&str] = &[
    "pizza", "coffee", "tea", "chocolate", "music", "jazz", "football", "cats", "dogs",
    "soccer", "tennis", "movies", "books", "pasta", "sushi", "cheese", "bread", "apples",
    "bananas", "rice", "soup", "wine", "beer", "milk", "candy", "cake", "basketball", "golf",
    "poetry", "history",
];

const JOBS: &[&str] = &[
    "doctor", "teacher", "nurse", "lawyer", "pilot", "farmer", "chef", "dentist", "banker",
    "writer", "singer", "painter", "plumber", "baker", "driver", "soldier", "judge",
    "scientist", "student", "waiter", "carpenter", "firefighter", "engineer", "architect",
    "artist", "actor", "accountant", "editor", "electrician", "astronaut",
];

const COLORED_THINGS: &[&str] = &[
    "car", "house", "door", "shirt", "hat", "dress", "ball", "cup", "chair", "table", "bike",
    "boat", "bag", "box", "pen", "book", "wall", "fence", "lamp", "sofa", "bed", "coat",
    "scarf", "shoe", "sock", "glove", "kite", "flag", "truck", "bus", "train", "phone", "mug",
    "bowl", "plate", "vase", "rug", "towel", "blanket", "pillow", "curtain", "umbrella",
    "balloon", "ribbon", "crayon", "pencil", "marker", "folder", "bucket", "bottle", "jacket",
    "sweater", "skirt", "tie", "belt", "wallet", "ring", "card", "ticket", "envelope", "candle",
    "roof", "gate", "sign", "bench",
];

const COLORS: &[&str] = &[
    "red", "blue", "green", "yellow", "black", "white", "orange", "purple", "pink", "brown",
    "gray", "silver",
];

const POSSESSIONS: &[&str] = &[
    "car", "dog", "cat", "house", "bike", "phone", "computer", "garden", "boat", "piano",
    "guitar", "camera", "watch", "horse", "job", "sister", "brother", "key", "map", "ticket",
    "passport", "umbrella", "apartment", "idea", "office",
];

const SMALL_ITEMS: &[&str] = &[
    "coin", "key", "ring", "letter", "book", "toy", "shoe", "sock", "pen", "pencil", "spoon",
    "fork", "knife", "cup", "ball", "apple", "orange", "egg", "watch", "phone", "wallet",
    "card", "stone", "shell", "bottle", "candle", "brush", "comb", "map", "note",
];

const CONTAINERS: &[&str] = &[
    "box", "bag", "drawer", "basket", "jar", "bucket", "cupboard", "closet", "bin", "suitcase",
    "backpack", "fridge", "sink", "bowl", "pocket", "envelope", "chest", "crate", "trunk",
    "cabinet",
];

const VEHICLES: &[&str] = &[
    "car", "truck", "bus", "van", "taxi", "tractor", "motorcycle", "scooter", "jeep", "train",
    "tram", "limousine", "ambulance", "forklift", "minivan",
];

const SINGLE_FRAME: &[&str] = &[""];

fn article(noun: &str) -> &'static str {
    match noun.as_bytes().first() {
        Some(b'a' | b'e' | b'i' | b'o' | b'u') => "an",
        _ => "a",
    }
}

impl Template {
    /// All eight templates in canonical order.
    pub fn all() -> Vec<Template> {
        TemplateName::ALL.into_iter().map(Template::get).collect()
    }

    pub fn get(name: TemplateName) -> Template {
        let (forms, subjects, relations, objects) = match name {
            TemplateName::CapitalOf => (COPULAR_FORMS, COUNTRY_NAMES, CAPITAL_FRAMES, CAPITALS),
            TemplateName::CanAbility => (CAN_FORMS, NAMES, SINGLE_FRAME, ABILITIES),
            TemplateName::Likes => (VERB_FORMS, NAMES, SINGLE_FRAME, LIKED),
            TemplateName::IsAJob => (NOMINAL_FORMS, NAMES, SINGLE_FRAME, JOBS),
            TemplateName::ColorIs => (COPULAR_FORMS, COLORED_THINGS, SINGLE_FRAME, COLORS),
            TemplateName::HasObject => (POSSESSION_FORMS, NAMES, SINGLE_FRAME, POSSESSIONS),
            TemplateName::InContainer => (NOMINAL_FORMS, SMALL_ITEMS, SINGLE_FRAME, CONTAINERS),
            TemplateName::DrivesVehicle => (VERB_FORMS, NAMES, SINGLE_FRAME, VEHICLES),
        };
        Template {
            name,
            forms,
            subject_vocab: subjects,
            relation_vocab: relations,
            object_vocab: objects,
            target_slot: TargetSlot::Object,
        }
    }

    pub fn supports(&self, form: NegationForm) -> bool {
        self.forms.contains(&form)
    }

    /// Every distinct filler combination, in a fixed order.
    pub fn fillers(&self) -> Vec<Fillers> {
        let mut out = Vec::new();
        for subject in 0..self.subject_vocab.len() {
            for relation in 0..self.relation_vocab.len() {
                if self.name == TemplateName::CapitalOf {
                    // the object is tied to the subject
                    out.push(Fillers {
                        subject,
                        relation,
                        object: subject,
                    });
                    continue;
                }
                for object in 0..self.object_vocab.len() {
                    out.push(Fillers {
                        subject,
                        relation,
                        object,
                    });
                }
            }
        }
        out
    }

    /// Fills the template. Returns `None` if `form` is not one of this
    /// template's forms.
    pub fn instantiate(&self, f: &Fillers, form: NegationForm) -> Option<Instance> {
        if !self.supports(form) {
            return None;
        }
        let s = self.subject_vocab[f.subject];
        let o = self.object_vocab[f.object];
        let (aff, neg) = match self.name {
            TemplateName::CapitalOf => {
                let stem = self.relation_vocab[f.relation].replace("{C}", s);
                (stem.clone(), format!("{stem} {}", form.cue()))
            }
            TemplateName::CanAbility => match form {
                Never => (format!("{s} can"), format!("{s} can never")),
                Cannot => (format!("{s} can"), format!("{s} cannot")),
                Cant => (format!("{s} can"), format!("{s} can't")),
                DoesNot => (format!("{s} does"), format!("{s} does not")),
                Doesnt => (format!("{s} does"), format!("{s} doesn't")),
                _ => unreachable!(),
            },
            TemplateName::Likes => {
                let neg = match form {
                    Never => format!("{s} never likes"),
                    _ => format!("{s} {} like", form.cue()),
                };
                (format!("{s} likes"), neg)
            }
            TemplateName::IsAJob => {
                let a = article(o);
                let neg = match form {
                    No => format!("{s} is no"),
                    _ => format!("{s} is {} {a}", form.cue()),
                };
                (format!("{s} is {a}"), neg)
            }
            TemplateName::ColorIs => (
                format!("The {s} is"),
                format!("The {s} is {}", form.cue()),
            ),
            TemplateName::HasObject => {
                let a = article(o);
                let neg = match form {
                    No => format!("{s} has no"),
                    Never => format!("{s} never has {a}"),
                    _ => format!("{s} {} have {a}", form.cue()),
                };
                (format!("{s} has {a}"), neg)
            }
            TemplateName::InContainer => match form {
                No => (
                    format!("There is {} {s} in the", article(s)),
                    format!("There is no {s} in the"),
                ),
                _ => (
                    format!("The {s} is in the"),
                    format!("The {s} is {} in the", form.cue()),
                ),
            },
            TemplateName::DrivesVehicle => {
                let a = article(o);
                let neg = match form {
                    Never => format!("{s} never drives {a}"),
                    _ => format!("{s} {} drive {a}", form.cue()),
                };
                (format!("{s} drives {a}"), neg)
            }
        };
        Some(Instance {
            affirmative_prefix: aff,
            negated_prefix: neg,
            target: format!(" {o}"),
        })
    }
}
