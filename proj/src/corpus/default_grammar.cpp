#include "gentoc/corpus/catalog.hpp"

namespace gentoc::corpus {

namespace {

AttributeSlot slot(std::string canonical, std::string surface, double inclusion, std::vector<std::string> lexicon) {
  return AttributeSlot{std::move(canonical), std::move(surface), std::move(lexicon), inclusion};
}

AttributeSlot slot(const std::string& canonical, double inclusion, std::vector<std::string> lexicon) {
  return slot(canonical, canonical, inclusion, std::move(lexicon));
}

Category headphones() {
  Category c;
  c.name = "headphones";
  c.slots = {
      slot("brand", 0.9, {"boat", "jbl", "sony", "noise", "boult", "zebronics", "realme", "oneplus", "skullcandy",
                          "ptron", "mivi", "philips"}),
      slot("model name", 0.6, {"rockerz 255 pro", "rockerz 450", "airdopes 141", "tune 510bt", "wh ch520", "buds z2",
                               "bassheads 900", "wave 200", "probass x1", "nord buds", "curve anc", "roar"}),
      slot("color", 0.6, {"raging red", "black", "white", "blue", "grey", "active black", "ocean blue", "mint green",
                          "teal green"}),
      slot("connectivity", 0.55, {"bluetooth", "wired", "wireless", "type c", "bluetooth 5.3"}),
      slot("headphone type", 0.55, {"neckband", "over ear", "in ear", "on ear", "tws", "earbuds"}),
      slot("battery life", 0.25, {"40 hours", "30 hours", "20 hours", "60 hours", "12 hours"}),
  };
  c.nouns = {"headphone", "headphones", "earphones", "headset"};
  c.fillers = {"with", "mic", "new", "original", "latest", "stereo", "bass", "premium", "sports"};
  c.templates = {
      make_template(c, {"brand", "model name", "color", "connectivity", "headphone type", "~", "#"}, 0.35, 2.0),
      make_template(c, {"brand", "model name", "connectivity", "headphone type", "#", "~", "battery life"}),
      make_template(c, {"~", "brand", "headphone type", "#", "model name", "color", "~"}),
  };
  return c;
}

Category inverters() {
  Category c;
  c.name = "inverters";
  c.slots = {
      slot("brand", 0.9, {"sofar", "luminous", "microtek", "growatt", "havells", "exide", "sukam", "livguard", "vguard",
                          "solis"}),
      slot("grid type", 0.6, {"ongrid", "offgrid", "hybrid", "on grid", "off grid"}),
      slot("model number", "model", 0.55, {"5.5ktl-x", "3ktl-m", "10ktl-x", "sun 5k", "zelio 1100", "ultima 950",
                                           "eco 1050", "mppt 3kw", "hkva 1250"}),
      slot("capacity", 0.6, {"5.5kw", "3kw", "10kw", "1kva", "2kva", "850va", "1100va", "5kw", "1.5kva"}),
      slot("phase", 0.5, {"three phase", "single phase"}),
      slot("battery type", 0.25, {"lithium", "tubular", "lead acid", "smf"}),
      slot("warranty", 0.2, {"1 year", "2 years", "5 years", "10 years"}),
  };
  c.nouns = {"inverter", "ups"};
  c.fillers = {"solar", "new", "for", "home", "pure", "sine", "wave", "digital"};
  c.templates = {
      make_template(c, {"brand", "grid type", "#", "model number", "capacity", "phase"}, 0.35, 2.0),
      make_template(c, {"brand", "capacity", "~", "#", "model number", "battery type", "warranty"}),
      make_template(c, {"~", "brand", "model number", "grid type", "~", "#", "phase", "warranty"}),
  };
  return c;
}

Category cookers() {
  Category c;
  c.name = "pressure cookers";
  c.slots = {
      slot("brand", 0.9, {"globe", "prestige", "hawkins", "pigeon", "butterfly", "united", "vinod", "bergner",
                          "cello"}),
      slot("material", 0.65, {"ss", "aluminium", "stainless steel", "hard anodized", "triply", "cast iron"}),
      slot("cooker type", "type of pressure cookers", 0.55, {"induction", "gas", "induction base", "gas stove"}),
      slot("capacity", 0.6, {"2l", "3l", "5l", "3 litre", "5 litre", "1.5l", "10l", "2 litre"}),
      slot("lid type", 0.35, {"outer lid", "inner lid"}),
      slot("color", 0.2, {"silver", "black", "red", "steel grey"}),
  };
  c.nouns = {"pressure cooker", "cooker"};
  c.fillers = {"with", "new", "best", "kitchen", "combo", "whistle", "deluxe"};
  c.templates = {
      make_template(c, {"brand", "material", "cooker type", "#", "capacity", "~"}, 0.35, 2.0),
      make_template(c, {"brand", "capacity", "lid type", "material", "#", "~", "cooker type"}),
      make_template(c, {"~", "brand", "color", "#", "lid type", "capacity", "material"}),
  };
  return c;
}

Category tops() {
  Category c;
  c.name = "tops";
  c.slots = {
      slot("occasion", 0.5, {"casual", "party", "formal", "festive", "office", "daily wear"}),
      slot("sleeve type", "sleeves type", 0.5, {"juliet sleeve", "puff sleeve", "full sleeve", "half sleeve",
                                               "sleeveless", "cap sleeve", "bell sleeve"}),
      slot("pattern", 0.55, {"solid", "printed", "striped", "checked", "floral", "embroidered", "self design"}),
      slot("gender", 0.6, {"women", "girls", "men", "ladies"}),
      slot("color", "colour", 0.6, {"maroon", "black", "white", "navy", "olive green", "pink", "yellow", "sky blue",
                                    "mustard"}),
      slot("fabric", 0.4, {"cotton", "rayon", "georgette", "crepe", "polyester", "linen", "pure cotton"}),
      slot("neck type", 0.3, {"round neck", "v neck", "collar", "boat neck", "square neck"}),
  };
  c.nouns = {"top", "tunic", "kurti", "shirt"};
  c.fillers = {"stylish", "new", "trendy", "for", "fashion", "regular", "fit"};
  c.templates = {
      make_template(c, {"occasion", "sleeve type", "pattern", "gender", "color", "#"}, 0.35, 2.0),
      make_template(c, {"gender", "fabric", "pattern", "#", "~", "neck type", "sleeve type"}),
      make_template(c, {"~", "color", "fabric", "occasion", "#", "~", "gender"}),
  };
  return c;
}

Category chairs() {
  Category c;
  c.name = "chairs";
  c.slots = {
      slot("brand", 0.85, {"godrej", "featherlite", "nilkamal", "green soul", "durian", "savya home", "cellbell",
                           "wipro", "supreme"}),
      slot("chair type", "type", 0.6, {"ergonomic", "executive", "revolving", "visitor", "gaming", "recliner"}),
      slot("material", 0.55, {"mesh", "leather", "leatherette", "plastic", "wooden", "metal", "fabric"}),
      slot("color", 0.5, {"black", "brown", "grey", "red", "beige", "blue"}),
      slot("back type", 0.4, {"high back", "mid back", "low back"}),
      slot("armrest type", 0.25, {"adjustable arms", "fixed arms", "3d arms", "armless"}),
  };
  c.nouns = {"chair", "chairs", "seat"};
  c.fillers = {"comfortable", "with", "new", "home", "study", "premium", "durable"};
  c.templates = {
      make_template(c, {"brand", "chair type", "material", "#", "color", "~"}, 0.35, 2.0),
      make_template(c, {"brand", "back type", "material", "chair type", "#", "armrest type", "~"}),
      make_template(c, {"~", "color", "material", "back type", "#", "~", "brand"}),
  };
  return c;
}

Category pumps() {
  Category c;
  c.name = "pumps";
  c.slots = {
      slot("brand", 0.9, {"kirloskar", "crompton", "texmo", "cri", "lubi", "usha", "shakti", "falcon", "havells"}),
      slot("model number", "model no.", 0.45, {"kds 1.0", "mini 2", "xcel 50", "jet 10", "s3m", "opw 2", "kos 150",
                                                "ssp 10"}),
      slot("power", "horse power", 0.6, {"0.5hp", "1hp", "1.5hp", "2hp", "3hp", "5hp", "7.5hp", "10hp"}),
      slot("pump type", "type", 0.6, {"submersible", "monoblock", "centrifugal", "self priming", "openwell",
                                       "booster"}),
      slot("phase", 0.45, {"single phase", "three phase"}),
      slot("usage", 0.4, {"agricultural", "domestic", "industrial", "irrigation", "borewell"}),
      slot("voltage", 0.2, {"220v", "240v", "415v", "180v"}),
  };
  c.nouns = {"pump", "motor", "water pump"};
  c.fillers = {"water", "for", "new", "high", "heavy", "duty", "pressure"};
  c.templates = {
      make_template(c, {"brand", "power", "pump type", "#", "phase", "~"}, 0.35, 2.0),
      make_template(c, {"brand", "model number", "power", "usage", "#", "~", "voltage"}),
      make_template(c, {"~", "pump type", "#", "brand", "phase", "~", "usage"}),
  };
  return c;
}

Category bulbs() {
  Category c;
  c.name = "bulbs";
  c.slots = {
      slot("brand", 0.9, {"philips", "syska", "havells", "wipro", "bajaj", "halonix", "crompton", "eveready",
                          "orient"}),
      slot("power", "wattage", 0.65, {"9w", "12w", "5w", "15w", "20w", "7w", "40w", "10w"}),
      slot("bulb type", 0.6, {"led", "cfl", "smart", "emergency", "halogen", "filament"}),
      slot("light color", "light colour", 0.5, {"cool daylight", "warm white", "neutral white", "white", "yellow",
                                                "rgb"}),
      slot("base type", 0.35, {"b22", "e27", "b22 base", "e27 base"}),
      slot("pack size", 0.3, {"pack of 2", "pack of 4", "set of 3", "pack of 10"}),
      slot("shape", 0.2, {"round", "tube", "candle", "globe"}),
  };
  c.nouns = {"bulb", "lamp", "light"};
  c.fillers = {"for", "home", "bright", "energy", "saving", "new", "indoor"};
  c.templates = {
      make_template(c, {"brand", "power", "bulb type", "#", "light color", "~"}, 0.35, 2.0),
      make_template(c, {"brand", "bulb type", "#", "power", "base type", "pack size", "~"}),
      make_template(c, {"~", "brand", "shape", "bulb type", "#", "light color", "~"}),
  };
  return c;
}

Category phones() {
  Category c;
  c.name = "mobile phones";
  c.slots = {
      slot("brand", 0.9, {"samsung", "apple", "vivo", "oppo", "redmi", "motorola", "nokia", "iqoo", "poco",
                          "realme"}),
      slot("model number", 0.6, {"galaxy s21", "galaxy m32", "iphone 13", "y21", "note 10", "narzo 50", "g62",
                                 "c31", "a15", "z7"}),
      slot("color", "colour", 0.55, {"phantom gray", "black", "blue", "midnight black", "green", "silver", "gold",
                                     "pacific blue"}),
      slot("storage", "internal storage", 0.5, {"64gb", "128gb", "256gb", "32gb", "512gb"}),
      slot("ram", 0.45, {"4gb", "6gb", "8gb", "12gb", "3gb"}),
      slot("network type", "network", 0.35, {"4g", "5g", "volte", "4g volte"}),
      slot("screen size", "display size", 0.2, {"6.5 inch", "6.7 inch", "6.1 inch", "6.8 inch"}),
  };
  c.nouns = {"smartphone", "mobile", "phone", "mobile phone"};
  c.fillers = {"new", "unlocked", "refurbished", "with", "latest", "dual", "sim"};
  c.templates = {
      make_template(c, {"brand", "model number", "color", "ram", "storage", "#"}, 0.35, 2.0),
      make_template(c, {"brand", "model number", "network type", "#", "~", "storage", "color"}),
      make_template(c, {"~", "brand", "#", "model number", "screen size", "ram", "~"}),
  };
  return c;
}

}  // namespace

CatalogGrammar default_grammar() {
  CatalogGrammar g;
  g.categories = {headphones(), inverters(), cookers(), tops(), chairs(), pumps(), bulbs(), phones()};
  return g;
}

}  // namespace gentoc::corpus
