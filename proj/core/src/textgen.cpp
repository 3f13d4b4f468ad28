#include "lime/textgen.hpp"

#include <algorithm>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace lime {

namespace {

// Banks are sampled with a 1/rank weight so each class has a dominant head
// and a long tail. The head keeps class-conditional argmaxes meaningful and
// the tail leaves rare words that stay split across several subword pieces.
struct WordBank {
    std::vector<const char*> words;
    std::vector<double> cdf;

    WordBank(std::initializer_list<const char*> list) : words(list) {
        std::vector<double> w(words.size());
        for (size_t i = 0; i < w.size(); ++i) {
            w[i] = 1.0 / static_cast<double>(i + 1);
        }
        build(w);
    }

    WordBank(std::initializer_list<std::pair<const char*, double>> list) {
        std::vector<double> w;
        for (const auto& [word, weight] : list) {
            words.push_back(word);
            w.push_back(weight);
        }
        build(w);
    }

    void build(const std::vector<double>& w) {
        double total = 0.0;
        for (const double x : w) {
            total += x;
        }
        cdf.resize(w.size());
        double run = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            run += w[i] / total;
            cdf[i] = run;
        }
        cdf.back() = 1.0;
    }

    const char* pick(Rng& rng) const {
        const double u = rng.next_double();
        const size_t i = static_cast<size_t>(
            std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        return words[std::min(i, words.size() - 1)];
    }
};

const WordBank& nn_bank() {
    static const WordBank b{
        "house", "garden", "river", "window", "door", "teacher", "street", "market", "bridge",
        "letter", "doctor", "mountain", "village", "forest", "island", "kitchen", "bottle",
        "mirror", "engine", "ladder", "writer", "farmer", "painter", "singer", "soldier",
        "lawyer", "pilot", "sailor", "barber", "tailor", "morning", "evening", "winter",
        "summer", "autumn", "spring", "harbor", "castle", "temple", "museum", "library",
        "station", "airport", "hospital", "school", "office", "factory", "theater", "bakery",
        "tower", "meadow", "valley", "desert", "canyon", "glacier", "lagoon", "shore", "cliff",
        "cavern", "trail", "anchor", "basket", "candle", "drawer", "eraser", "fabric", "goblet",
        "hammer", "insect", "jacket", "kettle", "lantern", "magnet", "needle", "orchard",
        "pencil", "quilt", "ribbon", "saddle", "thimble", "umbrella", "violin", "wagon",
        "barrel", "canvas", "dolphin", "eagle", "falcon", "rabbit", "turtle", "spider",
        "pigeon", "salmon", "walrus", "beaver", "badger", "donkey", "ferret", "bobcat",
        "leopard", "panther", "weasel", "heron", "otter", "marmot", "alpaca", "bison", "camel",
        "problem", "answer", "question", "reason", "moment", "signal", "method", "detail",
        "figure", "corner", "circle", "shadow", "thunder", "breeze", "pebble", "puddle",
        "ember", "frost", "petal", "stem", "lamp", "map", "book", "shop", "road", "plan",
        "boat", "train", "field", "stone", "cloud", "storm", "coast", "plate", "spoon",
        "chair", "table", "bench", "fence", "gate", "roof", "wall", "floor", "cellar", "attic",
        "stable", "mill", "forge", "loom", "kiln", "cart", "sled", "canoe", "raft", "tent",
        "flag", "drum", "flute", "harp", "bell", "rope", "chain", "hook", "net", "trap",
        "cage", "observatory", "laboratory", "typewriter", "grandmother", "grandfather",
        "lighthouse", "waterfall", "thunderstorm", "marketplace", "countryside", "photograph",
        "telescope", "microscope", "manuscript", "dictionary", "architecture", "cathedral",
        "monastery", "university", "helicopter", "locomotive", "submarine", "ambulance",
        "orchestra", "auditorium", "gymnasium", "aquarium", "planetarium", "escalator",
        "refrigerator", "accordion", "adventure", "afternoon", "algorithm", "alligator",
        "ambassador", "anniversary", "antelope", "apartment", "apparatus", "appetite",
        "apprentice", "arboretum", "archipelago", "argument", "armadillo", "arrangement",
        "artichoke", "asparagus", "assembly", "astronomer", "atmosphere", "attendant",
        "avalanche", "avocado", "balcony", "ballerina", "banister", "barometer", "barricade",
        "basement", "beekeeper", "beginning", "behavior", "billboard", "biography",
        "blacksmith", "blueprint", "bookshelf", "boulevard", "boundary", "bracelet",
        "briefcase", "broccoli", "brochure", "bulldozer", "bumblebee", "bungalow",
        "butterfly", "buttercup", "calculator", "calendar", "campaign", "candidate",
        "cardboard", "carnival", "carpenter", "carriage", "cartographer", "cassette",
        "caterpillar", "ceiling", "celebration", "centipede", "ceremony", "chandelier",
        "chemistry", "chimpanzee", "chocolate", "chronicle", "cinnamon", "clarinet",
        "classroom", "clockwork", "cobblestone", "coconut", "collection", "commander",
        "committee", "community", "companion", "competition", "composer", "computer",
        "condition", "conductor", "conference", "confidence", "connection", "conscience",
        "container", "continent", "conversation", "coriander", "cornfield", "corporation",
        "corridor", "courtyard", "cranberry", "creature", "crocodile", "crossroad",
        "cucumber", "cupboard", "daffodil", "dandelion", "daughter", "daydream", "decision",
        "delivery", "democracy", "department", "descendant", "destination", "detective",
        "difference", "dinosaur", "diplomat", "direction", "discovery", "discussion",
        "distance", "district", "dividend", "doctrine", "document", "dormitory",
        "dragonfly", "driftwood", "dumpling", "earthquake", "education", "election",
        "elephant", "elevator", "embankment", "emergency", "encyclopedia", "engineer",
        "envelope", "equation", "equipment", "estuary", "evidence", "exception",
        "excursion", "exhibition", "existence", "expedition", "experiment", "explorer",
        "fireplace", "firewood", "fisherman", "flamingo", "footprint", "forecast",
        "fountain", "framework", "furniture", "gardener", "generation", "geography",
        "geranium", "glossary", "gondola", "government", "grapevine", "grasshopper",
        "greenhouse", "guardian", "handwriting", "harmonica", "harvest", "headline",
        "hedgehog", "hemisphere", "hibiscus", "highway", "horizon", "hurricane",
        "illustration", "imagination", "industry", "influence", "ingredient", "innovation",
        "instrument", "intersection", "invention", "inventory", "invitation", "journal",
        "journey", "junction", "keyboard", "kingdom", "knapsack", "landscape", "language",
        "lavender", "lecture", "lemonade", "lifetime", "limestone", "literature",
        "luggage", "machine", "magazine", "magnolia", "mahogany", "mandolin", "marathon",
        "marigold", "material", "mattress", "measurement", "mechanic", "medicine",
        "mezzanine", "midnight", "milestone", "minister", "molecule", "monument",
        "mosquito", "mushroom", "musician", "mystery", "narrative", "navigator",
        "neighborhood", "newspaper", "nightingale", "notebook", "novelist", "obstacle",
        "occasion", "octopus", "operation", "opinion", "opponent", "organism",
        "ornament", "outline", "overcoat", "package", "pamphlet", "parachute", "parasol",
        "parliament", "passenger", "passport", "pavement", "pavilion", "pendulum",
        "peninsula", "perfume", "periscope", "personality", "perspective", "petition",
        "pharmacy", "phenomenon", "philosopher", "pineapple", "platform", "playground",
        "polygon", "porcelain", "porcupine", "portrait", "position", "possession",
        "postcard", "precipice", "president", "principle", "procession", "professor",
        "property", "proposal", "prosperity", "publisher", "pyramid", "quadrant",
        "quarry", "quotation", "raccoon", "radiator", "railroad", "rainbow", "raspberry",
        "reaction", "rectangle", "reflection", "rehearsal", "relative", "remainder",
        "reporter", "republic", "reservoir", "residence", "resource", "restaurant",
        "revolution", "rhubarb", "riverbank", "rosemary", "sandwich", "sapphire",
        "satchel", "scaffold", "scarecrow", "scenario", "schedule", "scholar",
        "scientist", "scoreboard", "sculpture", "seashell", "semester", "sentence",
        "shepherd", "shipyard", "shoulder", "signature", "situation", "skeleton",
        "skyscraper", "snowflake", "society", "solution", "souvenir", "spectacle",
        "spectrum", "spinach", "squirrel", "stadium", "staircase", "stallion",
        "statement", "stationery", "strategy", "structure", "sturgeon", "suitcase",
        "sunflower", "surface", "surprise", "swallow", "sweater", "symphony", "syllable",
        "tapestry", "teaspoon", "technology", "telegraph", "telephone", "temperature",
        "terrace", "territory", "textbook", "theory", "thermometer", "thicket",
        "threshold", "thumbnail", "timber", "tomato", "tornado", "tortoise", "tournament",
        "tradition", "treasure", "treatment", "triangle", "tributary", "trombone",
        "trumpet", "tunnel", "turbine", "turnip", "umpire", "undergrowth", "uniform",
        "universe", "utensil", "vacation", "vegetable", "vehicle", "velocity", "veranda",
        "vicinity", "victory", "vineyard", "volcano", "volunteer", "voyage", "warehouse",
        "waterfront", "wavelength", "wheelbarrow", "whirlwind", "wilderness", "windmill",
        "wordsmith", "workshop", "xylophone", "yardstick", "zeppelin", "zucchini"};
    return b;
}

const WordBank& nns_bank() {
    static const WordBank b{
        "houses", "gardens", "rivers", "windows", "doors", "teachers", "streets", "markets",
        "bridges", "letters", "doctors", "mountains", "villages", "forests", "islands",
        "kitchens", "bottles", "mirrors", "engines", "ladders", "writers", "farmers",
        "painters", "singers", "soldiers", "lawyers", "pilots", "sailors", "mornings",
        "evenings", "harbors", "castles", "temples", "museums", "libraries", "stations",
        "airports", "hospitals", "schools", "offices", "factories", "theaters", "bakeries",
        "towers", "meadows", "valleys", "deserts", "canyons", "shores", "cliffs", "trails",
        "anchors", "baskets", "candles", "drawers", "fabrics", "hammers", "insects",
        "jackets", "kettles", "lanterns", "magnets", "needles", "orchards", "pencils",
        "quilts", "ribbons", "saddles", "umbrellas", "violins", "wagons", "barrels", "prices",
        "goods", "crops", "tools", "boats", "trains", "fields", "stones", "clouds", "storms",
        "plates", "spoons", "chairs", "tables", "benches", "fences", "gates", "roofs",
        "walls", "floors", "properties"};
    return b;
}

const WordBank& jj_bank() {
    static const WordBank b{
        "old", "new", "large", "small", "quiet", "loud", "bright", "dark", "heavy", "light",
        "warm", "cold", "clean", "dirty", "quick", "slow", "soft", "hard", "sweet", "bitter",
        "calm", "wild", "plain", "fancy", "narrow", "wide", "deep", "shallow", "happy", "sad",
        "gentle", "rough", "smooth", "sharp", "dull", "fresh", "stale", "empty", "full",
        "strong", "weak", "brave", "timid", "clever", "simple", "strange", "common", "rare",
        "proud", "humble", "eager", "weary", "silent", "noisy", "tidy", "messy", "distant",
        "nearby", "golden", "silver", "wooden", "steady", "crooked", "honest", "loyal",
        "patient", "careful", "careless", "cheerful", "gloomy", "ancient", "modern",
        "pleasant", "polite", "rustic", "solemn", "vivid", "pale", "sturdy", "fragile",
        "famous", "curious", "sunny", "cozy", "dusty", "drafty", "spacious", "formal",
        "lively", "mellow", "crisp", "damp", "foggy", "misty", "breezy", "sleek", "grand",
        "modest", "serene", "abundant", "adorable", "adventurous", "affectionate",
        "agreeable", "ambitious", "amusing", "apprehensive", "astonishing", "attentive",
        "audacious", "authentic", "automatic", "beautiful", "believable", "beneficial",
        "bewildered", "boisterous", "bountiful", "breathtaking", "brilliant", "bustling",
        "carnivorous", "cautious", "ceremonial", "charming", "chivalrous", "circular",
        "cluttered", "colorful", "colossal", "comfortable", "compassionate", "competitive",
        "confident", "considerable", "consistent", "conspicuous", "continuous",
        "convenient", "cooperative", "courageous", "courteous", "creative", "credible",
        "cumbersome", "dazzling", "debatable", "decisive", "defective", "delicate",
        "delicious", "delightful", "dependable", "deliberate", "desirable", "diligent",
        "distinctive", "dramatic", "eccentric", "economical", "ecstatic", "educational",
        "elaborate", "eloquent", "enchanting", "encouraging", "energetic", "enormous",
        "entertaining", "enthusiastic", "essential", "exceptional", "exquisite",
        "extraordinary", "exuberant", "fashionable", "fearless", "ferocious",
        "flamboyant", "flawless", "flexible", "forgetful", "formidable", "fortunate",
        "fragrant", "frequent", "frivolous", "functional", "generous", "geometric",
        "glamorous", "glorious", "graceful", "gracious", "grateful", "gregarious",
        "gullible", "handsome", "harmonious", "hazardous", "hilarious", "historical",
        "hospitable", "humorous", "hypnotic", "identical", "illustrious", "imaginative",
        "immaculate", "impeccable", "important", "impressive", "improbable", "impulsive",
        "incredible", "independent", "industrious", "inevitable", "influential",
        "ingenious", "innocent", "inquisitive", "instinctive", "intelligent",
        "intentional", "interesting", "intricate", "inventive", "invisible",
        "irresistible", "jubilant", "judicious", "knowledgeable", "laborious",
        "legendary", "legitimate", "luminous", "luxurious", "magnificent", "majestic",
        "malleable", "marvelous", "meticulous", "miniature", "miraculous", "mysterious",
        "magnetic", "melodious", "memorable", "merciful", "mischievous", "monumental",
        "mountainous", "musical", "mythical", "nocturnal", "nostalgic", "noticeable",
        "nutritious", "obedient", "observant", "optimistic", "ordinary", "original",
        "ornamental", "outstanding", "parallel", "peculiar", "perpetual", "persistent",
        "persuasive", "picturesque", "plausible", "plentiful", "powerful", "practical",
        "precious", "predictable", "prehistoric", "prominent", "prosperous", "punctual",
        "quizzical", "radiant", "reasonable", "rebellious", "reflective", "reliable",
        "reluctant", "remarkable", "resilient", "resourceful", "respectable",
        "responsible", "rhythmic", "ridiculous", "satisfying", "scientific", "sensible",
        "sentimental", "significant", "skeptical", "spectacular", "splendid",
        "spontaneous", "substantial", "subtle", "successful", "suspicious",
        "sympathetic", "systematic", "talented", "tangible", "temporary", "tenacious",
        "thoughtful", "tolerant", "tranquil", "tremendous", "triumphant", "turbulent",
        "unanimous", "unusual", "valuable", "venerable", "versatile", "vibrant",
        "victorious", "vigilant", "vigorous", "virtuous", "voluntary", "vulnerable",
        "whimsical", "wonderful", "worthwhile", "youthful", "zealous"};
    return b;
}

const WordBank& color_bank() {
    static const WordBank b{"red",    "blue",   "green", "white", "black", "yellow",
                            "purple", "orange", "gray",  "brown", "pink",  "teal"};
    return b;
}

const WordBank& prop_bank() {
    static const WordBank b{"warm", "quiet", "bright",  "cold",   "clean",   "calm",
                            "wide", "deep",  "tidy",    "messy",  "noisy",   "plain",
                            "fancy", "fresh", "empty",  "full",   "golden",  "wooden",
                            "modern", "ancient", "pleasant", "silent", "sunny", "cozy"};
    return b;
}

const WordBank& jjr_bank() {
    static const WordBank b{"older",  "newer",  "larger",  "smaller", "brighter", "darker",
                            "warmer", "colder", "quicker", "slower",  "wider",    "deeper"};
    return b;
}

const WordBank& jjs_bank() {
    static const WordBank b{"oldest",   "newest",  "largest",  "smallest", "brightest",
                            "darkest",  "warmest", "coldest",  "quickest", "slowest"};
    return b;
}

const WordBank& vb_bank() {
    static const WordBank b{"open",  "close", "hold",  "carry", "watch", "follow", "build",
                            "paint", "clean", "fill",  "move",  "lift",  "turn",   "pull",
                            "push",  "read",  "write", "sing",  "play",  "visit",  "cross",
                            "guard", "repair", "study", "teach", "serve", "bring",  "take",
                            "keep",  "find",  "show",  "tell",  "know",  "see",    "hear",
                            "like",  "need",  "want",  "own",   "lock"};
    return b;
}

const WordBank& vbz_bank() {
    static const WordBank b{"opens",  "closes", "holds",  "carries", "watches", "follows",
                            "builds", "paints", "cleans", "fills",   "moves",   "lifts",
                            "turns",  "pulls",  "pushes", "reads",   "writes",  "sings",
                            "plays",  "visits", "crosses", "guards", "repairs", "studies",
                            "teaches", "serves", "brings", "takes",  "keeps",   "finds",
                            "shows",  "tells",  "knows",  "sees",    "hears",   "likes",
                            "needs",  "wants",  "owns",   "locks"};
    return b;
}

const WordBank& vbd_bank() {
    static const WordBank b{"opened",  "closed",  "held",    "carried", "watched", "followed",
                            "built",   "painted", "cleaned", "filled",  "moved",   "lifted",
                            "turned",  "pulled",  "pushed",  "wrote",   "sang",    "played",
                            "visited", "crossed", "guarded", "repaired", "studied", "taught",
                            "served",  "brought", "took",    "kept",    "found",   "showed",
                            "told",    "knew",    "saw",     "heard",   "liked",   "needed",
                            "wanted",  "owned",   "locked",  "read",    "abandoned",
                            "absorbed", "accepted", "accomplished", "accumulated",
                            "achieved", "acquired", "addressed", "adjusted", "admired",
                            "admitted", "adopted", "advanced", "advertised", "advised",
                            "analyzed", "announced", "answered", "anticipated",
                            "apologized", "appeared", "applauded", "appointed",
                            "appreciated", "approached", "approved", "arranged",
                            "assembled", "assigned", "assisted", "astonished",
                            "attempted", "attended", "attracted", "avoided", "balanced",
                            "bargained", "behaved", "believed", "belonged", "borrowed",
                            "calculated", "captured", "celebrated", "challenged",
                            "collected", "combined", "commanded", "communicated",
                            "compared", "competed", "complained", "completed",
                            "composed", "concluded", "conducted", "confirmed",
                            "congratulated", "connected", "considered", "constructed",
                            "consulted", "continued", "contributed", "convinced",
                            "cooperated", "coordinated", "corrected", "criticized",
                            "cultivated", "declared", "decorated", "defended",
                            "delivered", "demanded", "demonstrated", "departed",
                            "described", "designed", "destroyed", "developed",
                            "devoured", "disagreed", "disappeared", "discovered",
                            "discussed", "displayed", "distributed", "educated",
                            "encountered", "encouraged", "entertained", "established",
                            "estimated", "examined", "exchanged", "exclaimed",
                            "exercised", "expanded", "expected", "experienced",
                            "explained", "explored", "expressed", "extended",
                            "gathered", "hesitated", "identified", "illustrated",
                            "imagined", "imitated", "improved", "included",
                            "increased", "indicated", "inspected", "inspired",
                            "installed", "insisted", "instructed", "interrupted",
                            "introduced", "invented", "investigated", "invited",
                            "measured", "mentioned", "negotiated", "observed",
                            "obtained", "occupied", "organized", "participated",
                            "performed", "persuaded", "photographed", "practiced",
                            "predicted", "preferred", "prepared", "presented",
                            "preserved", "pretended", "prevented", "proceeded",
                            "produced", "promised", "pronounced", "proposed",
                            "protected", "protested", "provided", "published",
                            "purchased", "questioned", "recognized", "recommended",
                            "recorded", "recovered", "reflected", "registered",
                            "rehearsed", "remembered", "reminded", "repeated",
                            "replaced", "reported", "represented", "requested",
                            "rescued", "resembled", "respected", "responded",
                            "restored", "returned", "revealed", "reviewed",
                            "sketched", "stretched", "suggested", "supervised",
                            "supported", "surrendered", "surrounded", "survived",
                            "suspected", "translated", "transported", "traveled",
                            "treasured", "trembled", "uncovered", "understood",
                            "volunteered", "wandered", "welcomed", "whispered",
                            "witnessed", "wondered"};
    return b;
}

const WordBank& vbg_bank() {
    static const WordBank b{"opening",  "closing",  "holding",  "carrying", "watching",
                            "following", "building", "painting", "cleaning", "filling",
                            "moving",   "lifting",  "turning",  "pulling",  "pushing",
                            "reading",  "writing",  "singing",  "playing",  "visiting",
                            "crossing", "guarding", "repairing", "studying", "teaching",
                            "serving",  "bringing", "taking",   "keeping",  "finding",
                            "showing",  "telling",  "walking",  "riding",   "sailing",
                            "cooking"};
    return b;
}

const WordBank& vbp_bank() {
    static const WordBank b{"open", "close", "hold", "carry", "watch", "follow", "build",
                            "keep", "need",  "want", "like",  "know"};
    return b;
}

const WordBank& rb_bank() {
    static const WordBank b{"quietly", "slowly",  "quickly", "gently",   "calmly", "carefully",
                            "eagerly", "proudly", "softly",  "loudly",   "bravely", "barely",
                            "often",   "never",   "always",  "rarely",   "soon",    "now",
                            "then",    "today",   "tonight", "together", "away",    "back",
                            "upstairs", "downstairs", "outside", "inside"};
    return b;
}

const WordBank& person_bank() {
    static const WordBank b{
        "Sara",   "Murphy", "Omar",   "Lena",   "Felix",  "Nadia",  "Tomas",  "Ingrid",
        "Pavel",  "Marta",  "Hugo",   "Clara",  "Ivan",   "Rosa",   "Ethan",  "Amara",
        "Dario",  "Yuki",   "Amir",   "Sofia",  "Viktor", "Hana",   "Bruno",  "Alice",
        "Oscar",  "Nina",   "Leo",    "Vera",   "Milo",   "Edith",  "Jonas",  "Petra",
        "Ravi",   "Mona",   "Stefan", "Ada",    "Noel",   "Iris",   "Caleb",  "Ruth",
        "Dmitri", "Lucia",  "Harold", "Gustav", "Elena",  "Walter", "Selma",  "Arthur",
        "Freya",  "Ernest", "Wanda",  "Lionel", "Hazel",  "Edgar",  "Sylvia", "Anton",
        "Greta",  "Maren",  "Otto",   "Paula",  "Rufus",  "Thea",   "Viggo",  "Astrid"};
    return b;
}

const WordBank& country_bank() {
    static const WordBank b{
        "Japan",   "France",  "Brazil",  "Canada",  "Egypt",    "India",   "Norway",
        "Spain",   "Kenya",   "Chile",   "Poland",  "Greece",   "Turkey",  "Mexico",
        "Peru",    "Austria", "Belgium", "Denmark", "Finland",  "Hungary", "Iceland",
        "Ireland", "Jordan",  "Latvia",  "Morocco", "Nepal",    "Oman",    "Portugal",
        "Qatar",   "Serbia",  "Tunisia", "Uruguay", "Vietnam",  "Zambia",  "New Zealand",
        "Costa Rica", "Sri Lanka", "South Korea"};
    return b;
}

const WordBank& org_bank() {
    static const WordBank b{"Nortech",   "Bluecrest",  "Stonegate", "Fairwind",    "Ironleaf",
                            "Maplecore", "Silverbay",  "Redpine",   "Goldfern",    "Greyharbor",
                            "Brightwell", "Clearbrook", "Oakmere",   "Ashford",    "Winterfield",
                            "Summerton", "Rainford",   "Snowmere",  "Duskvale",    "Dawnridge"};
    return b;
}

const WordBank& dt_sg_bank() {
    static const WordBank b{{"the", 0.52},  {"a", 0.22},     {"this", 0.08},   {"that", 0.06},
                            {"each", 0.05}, {"every", 0.04}, {"another", 0.03}};
    return b;
}

const WordBank& dt_pl_bank() {
    static const WordBank b{{"the", 0.55}, {"some", 0.2}, {"these", 0.15}, {"those", 0.1}};
    return b;
}

const WordBank& prps_bank() {
    static const WordBank b{{"his", 0.28}, {"her", 0.26}, {"their", 0.22},
                            {"our", 0.12}, {"its", 0.07}, {"your", 0.05}};
    return b;
}

const WordBank& prp_sg_bank() {
    static const WordBank b{{"he", 0.38}, {"she", 0.34}, {"it", 0.28}};
    return b;
}

const WordBank& prp_pl_bank() {
    static const WordBank b{{"they", 0.45}, {"we", 0.33}, {"you", 0.22}};
    return b;
}

const WordBank& prep_bank() {
    static const WordBank b{{"in", 0.28},     {"on", 0.16},   {"near", 0.13},
                            {"under", 0.09},  {"behind", 0.08}, {"beside", 0.07},
                            {"over", 0.07},   {"across", 0.06}, {"along", 0.06}};
    return b;
}

const WordBank& cc_bank() {
    static const WordBank b{{"and", 0.6}, {"but", 0.3}, {"or", 0.1}};
    return b;
}

const WordBank& md_bank() {
    static const WordBank b{{"will", 0.35}, {"can", 0.2},    {"must", 0.15}, {"may", 0.1},
                            {"should", 0.1}, {"might", 0.05}, {"could", 0.05}};
    return b;
}

const WordBank& deg_bank() {
    static const WordBank b{{"very", 0.4}, {"quite", 0.25}, {"rather", 0.2}, {"nearly", 0.15}};
    return b;
}

const WordBank& vbd_intr_bank() {
    static const WordBank b{"arrived", "departed", "waited", "rested",   "wandered",
                            "slept",   "smiled",   "nodded", "paused",   "vanished"};
    return b;
}

const WordBank& vbd_move_bank() {
    static const WordBank b{"rose", "fell", "climbed", "dropped"};
    return b;
}

const WordBank& vbd_ctrl_bank() {
    static const WordBank b{"wanted", "tried", "began", "hoped"};
    return b;
}

// Hyphenated compound modifiers; the inner tags follow treebank convention
// for each half, so the halves exercise several metadata classes.
struct Compound {
    const char* first;
    const char* first_tag;
    const char* second;
    const char* second_tag;
};

const std::vector<Compound>& compound_bank() {
    static const std::vector<Compound> b{
        {"well", "RB", "known", "VBN"},    {"long", "JJ", "term", "NN"},
        {"old", "JJ", "fashioned", "VBN"}, {"hand", "NN", "made", "VBN"},
        {"short", "JJ", "lived", "VBN"},   {"far", "RB", "reaching", "VBG"}};
    return b;
}

bool starts_with_vowel(const char* w) {
    const char c = w[0];
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

}  // namespace

TextGenerator::TextGenerator(const DomainSchema& pos, const DomainSchema& ner)
    : pos_(pos),
      ner_(ner),
      nn_(pos_id("NN")),
      nns_(pos_id("NNS")),
      nnp_(pos_id("NNP")),
      jj_(pos_id("JJ")),
      jjr_(pos_id("JJR")),
      jjs_(pos_id("JJS")),
      vb_(pos_id("VB")),
      vbz_(pos_id("VBZ")),
      vbd_(pos_id("VBD")),
      vbg_(pos_id("VBG")),
      vbp_(pos_id("VBP")),
      md_(pos_id("MD")),
      rb_(pos_id("RB")),
      in_(pos_id("IN")),
      dt_(pos_id("DT")),
      cc_(pos_id("CC")),
      prp_(pos_id("PRP")),
      prps_(pos_id("PRP$")),
      ex_(pos_id("EX")),
      pos_tag_(pos_id("POS")),
      hyph_(pos_id("HYPH")),
      cd_(pos_id("CD")),
      to_(pos_id("TO")),
      period_(pos_id(".")),
      comma_(pos_id(",")),
      colon_(pos_id(":")),
      nfp_(pos_id("NFP")),
      dollar_(pos_id("$")) {
    for (const char* label : {"PERSON", "GPE", "ORG"}) {
        if (ner_.class_id(label) < 0) {
            fail("text generator: entity label missing from schema: ", label);
        }
    }
}

uint16_t TextGenerator::pos_id(const char* label) const {
    const int id = pos_.class_id(label);
    if (id < 0) {
        fail("text generator: class missing from schema: ", label);
    }
    return static_cast<uint16_t>(id);
}

std::string TextGenerator::render(const std::vector<Tok>& toks) const {
    std::string out;
    for (const Tok& t : toks) {
        if (!t.attach && !out.empty()) {
            out.push_back(' ');
        }
        out += t.surface;
    }
    return out;
}

void TextGenerator::sentence(Rng& rng, std::vector<Tok>& out) const {
    const size_t first = out.size();
    const auto add = [&](std::string s, uint16_t pos, bool attach = false) {
        out.push_back({std::move(s), pos, attach});
    };
    const auto period = [&] { add(".", period_, true); };
    const auto comma = [&] { add(",", comma_, true); };
    const auto person = [&] { add(person_bank().pick(rng), nnp_); };
    const auto country = [&] {
        const std::string full = country_bank().pick(rng);
        size_t start = 0;
        while (start < full.size()) {
            const size_t sp = full.find(' ', start);
            const size_t end = sp == std::string::npos ? full.size() : sp;
            add(full.substr(start, end - start), nnp_);
            start = end + 1;
        }
    };
    // Determiner phrase; a possessive pronoun replaces the determiner some of
    // the time, and "a" becomes "an" in front of a vowel.
    const auto np = [&](bool plural) {
        std::string det;
        uint16_t det_tag = dt_;
        if (rng.next_double() < 0.15) {
            det = prps_bank().pick(rng);
            det_tag = prps_;
        } else {
            det = (plural ? dt_pl_bank() : dt_sg_bank()).pick(rng);
        }
        const bool with_adj = rng.next_double() < 0.35;
        const char* adj = with_adj ? jj_bank().pick(rng) : nullptr;
        const char* head = plural ? nns_bank().pick(rng) : nn_bank().pick(rng);
        if (det == "a" && starts_with_vowel(with_adj ? adj : head)) {
            det = "an";
        }
        add(det, det_tag);
        if (with_adj) {
            add(adj, jj_);
        }
        add(head, plural ? nns_ : nn_);
    };
    const auto adv_opt = [&] {
        if (rng.next_double() < 0.15) {
            add(rb_bank().pick(rng), rb_);
        }
    };
    const auto deg_opt = [&] {
        if (rng.next_double() < 0.4) {
            add(deg_bank().pick(rng), rb_);
        }
    };
    // Finite verb for a singular subject: present, past, or modal plus base.
    const auto verb_sg = [&] {
        const double r = rng.next_double();
        if (r < 0.45) {
            add(vbz_bank().pick(rng), vbz_);
        } else if (r < 0.9) {
            add(vbd_bank().pick(rng), vbd_);
        } else {
            add(md_bank().pick(rng), md_);
            add(vb_bank().pick(rng), vb_);
        }
    };
    const auto copula_sg = [&] {
        if (rng.next_double() < 0.6) {
            add("is", vbz_);
        } else {
            add("was", vbd_);
        }
    };
    const auto copula_pl = [&] {
        if (rng.next_double() < 0.6) {
            add("are", vbp_);
        } else {
            add("were", vbd_);
        }
    };

    static constexpr int kWeights[] = {10, 8, 8, 6, 6, 5, 5, 5, 5, 4, 5,
                                       4,  4, 4, 4, 4, 3, 4, 4, 4, 2, 2};
    static constexpr int kTotal = [] {
        int t = 0;
        for (const int w : kWeights) {
            t += w;
        }
        return t;
    }();
    int pick = static_cast<int>(rng.next_below(kTotal));
    int kind = 0;
    while (pick >= kWeights[kind]) {
        pick -= kWeights[kind];
        ++kind;
    }

    switch (kind) {
        case 0:  // The teacher often opens a window.
            np(false);
            adv_opt();
            verb_sg();
            np(false);
            period();
            break;
        case 1:  // The lantern hung near the door.
            np(false);
            verb_sg();
            add(prep_bank().pick(rng), in_);
            np(false);
            period();
            break;
        case 2:  // Sara carefully painted the fence.
            person();
            adv_opt();
            verb_sg();
            np(false);
            period();
            break;
        case 3: {  // She keeps a ledger. / They will open a shop.
            const bool plural = rng.next_double() < 0.5;
            add((plural ? prp_pl_bank() : prp_sg_bank()).pick(rng), prp_);
            const double r = rng.next_double();
            if (r < 0.4) {
                if (plural) {
                    add(vbp_bank().pick(rng), vbp_);
                } else {
                    add(vbz_bank().pick(rng), vbz_);
                }
            } else if (r < 0.8) {
                add(vbd_bank().pick(rng), vbd_);
            } else {
                add(md_bank().pick(rng), md_);
                add(vb_bank().pick(rng), vb_);
            }
            np(false);
            period();
            break;
        }
        case 4:  // The house is old and quiet.
            np(false);
            copula_sg();
            add(jj_bank().pick(rng), jj_);
            add(cc_bank().pick(rng), cc_);
            add(jj_bank().pick(rng), jj_);
            period();
            break;
        case 5:  // The gardens are very calm.
            np(true);
            copula_pl();
            deg_opt();
            add(jj_bank().pick(rng), jj_);
            period();
            break;
        case 6:  // There is a quiet house near the river.
            add("there", ex_);
            copula_sg();
            np(false);
            add(prep_bank().pick(rng), in_);
            np(false);
            period();
            break;
        case 7:  // In Japan, the gardens are calm.
            add("in", in_);
            country();
            comma();
            np(true);
            copula_pl();
            add(jj_bank().pick(rng), jj_);
            period();
            break;
        case 8: {  // They don't need a map.
            const double r = rng.next_double();
            if (r < 0.3) {
                const bool plural = rng.next_double() < 0.5;
                add((plural ? prp_pl_bank() : prp_sg_bank()).pick(rng), prp_);
                add("did", vbd_);
            } else if (r < 0.65) {
                add(prp_pl_bank().pick(rng), prp_);
                add("do", vbp_);
            } else {
                add(prp_sg_bank().pick(rng), prp_);
                add("does", vbz_);
            }
            add("n't", rb_, true);
            add(vb_bank().pick(rng), vb_);
            np(false);
            period();
            break;
        }
        case 9:  // We'll visit Japan.
            add(prp_pl_bank().pick(rng), prp_);
            add("'ll", md_, true);
            add(vb_bank().pick(rng), vb_);
            if (rng.next_double() < 0.35) {
                country();
            } else {
                np(false);
            }
            period();
            break;
        case 10:  // Murphy's garden is quite old.
            person();
            add("'s", pos_tag_, true);
            add(nn_bank().pick(rng), nn_);
            copula_sg();
            deg_opt();
            add(jj_bank().pick(rng), jj_);
            period();
            break;
        case 11: {  // The well-known writer arrived quietly.
            add("the", dt_);
            const auto& comp =
                compound_bank()[rng.next_below(compound_bank().size())];
            add(comp.first, pos_id(comp.first_tag));
            add("-", hyph_, true);
            add(comp.second, pos_id(comp.second_tag), true);
            add(nn_bank().pick(rng), nn_);
            add(vbd_intr_bank().pick(rng), vbd_);
            adv_opt();
            period();
            break;
        }
        case 12:  // The prices rose 12% in Japan.
            add(dt_pl_bank().pick(rng), dt_);
            add(nns_bank().pick(rng), nns_);
            add(vbd_move_bank().pick(rng), vbd_);
            add(std::to_string(2 + rng.next_below(97)), cd_);
            add("%", nfp_, true);
            add("in", in_);
            country();
            period();
            break;
        case 13:  // Sara bought a lamp for $40.
            person();
            add(rng.next_double() < 0.6 ? "bought" : "sold", vbd_);
            np(false);
            add("for", in_);
            add("$", dollar_);
            add(std::to_string(2 + rng.next_below(97)), cd_, true);
            period();
            break;
        case 14:  // Reading a book is pleasant.
            add(vbg_bank().pick(rng), vbg_);
            np(false);
            add("is", vbz_);
            deg_opt();
            add(jj_bank().pick(rng), jj_);
            period();
            break;
        case 15:  // The river is wider than the road.
            np(false);
            copula_sg();
            add(jjr_bank().pick(rng), jjr_);
            add("than", in_);
            np(false);
            period();
            break;
        case 16:  // The oldest house in the village is small.
            add("the", dt_);
            add(jjs_bank().pick(rng), jjs_);
            add(nn_bank().pick(rng), nn_);
            add("in", in_);
            np(false);
            add("is", vbz_);
            add(jj_bank().pick(rng), jj_);
            period();
            break;
        case 17:  // She wanted to open a shop.
            if (rng.next_double() < 0.5) {
                person();
            } else {
                add(prp_sg_bank().pick(rng), prp_);
            }
            add(vbd_ctrl_bank().pick(rng), vbd_);
            add("to", to_);
            add(vb_bank().pick(rng), vb_);
            np(false);
            period();
            break;
        case 18:  // Nortech built a factory in Japan.
            add(org_bank().pick(rng), nnp_);
            add(rng.next_double() < 0.5 ? "built" : "opened", vbd_);
            np(false);
            add("in", in_);
            country();
            period();
            break;
        case 19:  // Omar and Lena traveled in Japan.
            person();
            add("and", cc_);
            person();
            if (rng.next_double() < 0.4) {
                add("traveled", vbd_);
            } else {
                add(vbd_intr_bank().pick(rng), vbd_);
            }
            add("in", in_);
            country();
            period();
            break;
        case 20:  // The teacher waited, but the pilot departed.
            np(false);
            add(vbd_intr_bank().pick(rng), vbd_);
            comma();
            add(cc_bank().pick(rng), cc_);
            np(false);
            add(vbd_intr_bank().pick(rng), vbd_);
            period();
            break;
        default:  // They're quite happy.
            add(prp_pl_bank().pick(rng), prp_);
            add("'re", vbp_, true);
            deg_opt();
            add(jj_bank().pick(rng), jj_);
            period();
            break;
    }

    char& lead = out[first].surface[0];
    if (lead >= 'a' && lead <= 'z') {
        lead = static_cast<char>(lead - 'a' + 'A');
    }
}

void TextGenerator::arithmetic_line(Rng& rng, std::vector<Tok>& out, bool truncated, int* a,
                                    int* b) const {
    const int av = 5 + static_cast<int>(rng.next_below(45));
    const int bv = 5 + static_cast<int>(rng.next_below(45));
    out.push_back({"The", dt_, false});
    out.push_back({"result", nn_, false});
    out.push_back({"is", vbz_, false});
    out.push_back({":", colon_, true});
    out.push_back({std::to_string(av), cd_, false});
    out.push_back({"+", nfp_, true});
    out.push_back({std::to_string(bv), cd_, true});
    out.push_back({"=", nfp_, false});
    if (!truncated) {
        out.push_back({std::to_string(av + bv), cd_, false});
    }
    if (a != nullptr) {
        *a = av;
    }
    if (b != nullptr) {
        *b = bv;
    }
}

std::string TextGenerator::arithmetic_prompt(int a, int b) {
    return "The result is: " + std::to_string(a) + "+" + std::to_string(b) + " = ";
}

void TextGenerator::pir_fact(Rng& rng, std::vector<Tok>& out, std::string* gold) const {
    out.push_back({person_bank().pick(rng), nnp_, false});
    out.push_back({"is", vbz_, false});
    out.push_back({"in", in_, false});
    out.push_back({"the", dt_, false});
    out.push_back({color_bank().pick(rng), jj_, false});
    out.push_back({"room", nn_, false});
    out.push_back({".", period_, true});
    *gold = prop_bank().pick(rng);
}

void TextGenerator::pir_cue(std::vector<Tok>& out, const std::string* answer) const {
    out.push_back({"It", prp_, false});
    out.push_back({"has", vbz_, false});
    out.push_back({"the", dt_, false});
    out.push_back({"following", jj_, false});
    out.push_back({"properties", nns_, false});
    out.push_back({":", colon_, true});
    if (answer != nullptr) {
        out.push_back({*answer, jj_, false});
        out.push_back({".", period_, true});
    }
}

std::vector<TextGenerator::Tok> TextGenerator::pir_tokens(Rng& rng, int noise_tokens,
                                                          bool with_answer,
                                                          std::string* gold) const {
    std::vector<Tok> toks;
    std::string prop;
    pir_fact(rng, toks, &prop);
    pir_cue(toks, &prop);
    int filler = 0;
    while (filler < noise_tokens) {
        const size_t before = toks.size();
        sentence(rng, toks);
        filler += static_cast<int>(toks.size() - before);
    }
    pir_cue(toks, with_answer ? &prop : nullptr);
    if (gold != nullptr) {
        *gold = prop;
    }
    return toks;
}

TextGenerator::PirInstance TextGenerator::pir_instance(Rng& rng, int noise_tokens) const {
    std::string gold;
    const std::vector<Tok> toks = pir_tokens(rng, noise_tokens, false, &gold);
    return {render(toks), gold};
}

std::string TextGenerator::pir_document(Rng& rng, int noise_tokens) const {
    return render(pir_tokens(rng, noise_tokens, true, nullptr));
}

std::string TextGenerator::document(Rng& rng) const {
    const double r = rng.next_double();
    std::vector<Tok> toks;
    if (r < 0.85) {
        const size_t n = 3 + rng.next_below(6);
        for (size_t i = 0; i < n; ++i) {
            sentence(rng, toks);
        }
        return render(toks);
    }
    if (r < 0.95) {
        const bool truncated = rng.next_double() < 0.6;
        arithmetic_line(rng, toks, truncated);
        std::string text = render(toks);
        if (truncated) {
            text.push_back(' ');
        }
        return text;
    }
    return pir_document(rng, 20 + static_cast<int>(rng.next_below(180)));
}

std::vector<TaggedSentence> TextGenerator::tagged_sentences(Rng& rng, size_t n) const {
    std::vector<TaggedSentence> result;
    result.reserve(n);
    const uint16_t sp = pos_id("_SP");
    for (size_t i = 0; i < n; ++i) {
        std::vector<Tok> toks;
        const double r = rng.next_double();
        if (r < 0.80) {
            sentence(rng, toks);
        } else if (r < 0.90) {
            const bool truncated = rng.next_double() < 0.5;
            arithmetic_line(rng, toks, truncated);
            if (truncated) {
                // A cut-off line ends in whitespace, which the pre-tokenizer
                // surfaces as a final empty token; the tagger must see it.
                toks.push_back({"", sp, false});
            }
        } else if (r < 0.95) {
            std::string prop;
            pir_fact(rng, toks, &prop);
        } else {
            const std::string prop = prop_bank().pick(rng);
            pir_cue(toks, &prop);
        }
        TaggedSentence ts;
        ts.reserve(toks.size());
        for (const Tok& t : toks) {
            ts.push_back({t.surface, t.pos});
        }
        result.push_back(std::move(ts));
    }
    return result;
}

std::string TextGenerator::gazetteer_tsv() const {
    std::string out;
    const auto section = [&out](const WordBank& bank, const char* label) {
        for (const char* w : bank.words) {
            out += w;
            out.push_back('\t');
            out += label;
            out.push_back('\n');
        }
    };
    section(person_bank(), "PERSON");
    section(country_bank(), "GPE");
    section(org_bank(), "ORG");
    return out;
}

}  // namespace lime
