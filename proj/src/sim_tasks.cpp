#include "planahead/sim_env.hpp"

namespace planahead {

namespace {

struct Element {
  std::string bid;
  std::string role;  // textbox, button, link, combobox, checkbox, text
  std::string label;
  std::string value;
};

struct Page {
  std::string title;
  std::string url;
  std::vector<Element> elements;
};

std::string escape_html(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render_html(const std::string& state, const Page& page) {
  std::string html = "<html data-state=\"" + state + "\"><head><title>" + escape_html(page.title) +
                     "</title></head><body><h1>" + escape_html(page.title) + "</h1>";
  for (const auto& e : page.elements) {
    const auto bid = " bid=\"" + e.bid + "\"";
    const auto label = escape_html(e.label);
    if (e.role == "textbox") {
      html += "<label>" + label + "<input type=\"text\"" + bid + " value=\"" + escape_html(e.value) + "\"/></label>";
    } else if (e.role == "button") {
      html += "<button" + bid + ">" + label + "</button>";
    } else if (e.role == "link") {
      html += "<a href=\"#\"" + bid + ">" + label + "</a>";
    } else if (e.role == "combobox") {
      html += "<select" + bid + " aria-label=\"" + label + "\"><option>" + escape_html(e.value) + "</option></select>";
    } else if (e.role == "checkbox") {
      html += "<label><input type=\"checkbox\"" + bid + (e.value == "checked" ? " checked" : "") + "/>" + label +
              "</label>";
    } else {
      html += "<p" + bid + ">" + label + "</p>";
    }
  }
  return html + "</body></html>";
}

std::string render_axtree(const Page& page) {
  std::string tree = "RootWebArea '" + page.title + "'\n";
  for (const auto& e : page.elements) {
    tree += "  [" + e.bid + "] " + (e.role == "text" ? std::string("StaticText") : e.role) + " '" + e.label + "'";
    if (!e.value.empty()) tree += " value='" + e.value + "'";
    tree += "\n";
  }
  return tree;
}

class ScriptBuilder {
 public:
  ScriptBuilder(std::string task_id, std::string goal, std::string domain) {
    script_.task_id = std::move(task_id);
    script_.goal = std::move(goal);
    script_.domain_tag = std::move(domain);
  }

  ScriptBuilder& state(const std::string& name, const Page& page, bool accepting = false) {
    const auto id = qualified(name);
    if (script_.states.empty()) script_.initial = id;
    script_.states.push_back(id);
    if (accepting) script_.accepting.insert(id);
    Observation o;
    o.url = page.url;
    o.html = render_html(id, page);
    o.axtree = render_axtree(page);
    o.screenshot = placeholder_screenshot(id);
    script_.observation_of.emplace(id, std::move(o));
    return *this;
  }

  ScriptBuilder& edge(const std::string& from, std::string_view action, const std::string& to) {
    script_.transitions.emplace(std::pair{qualified(from), normalize_action(action)}, qualified(to));
    return *this;
  }

  SimTaskScript build() { return script_; }

 private:
  std::string qualified(const std::string& name) const { return script_.task_id + ":" + name; }

  SimTaskScript script_;
};

Element box(std::string bid, std::string label, std::string value = {}) {
  return {std::move(bid), "textbox", std::move(label), std::move(value)};
}
Element button(std::string bid, std::string label) { return {std::move(bid), "button", std::move(label), {}}; }
Element link(std::string bid, std::string label) { return {std::move(bid), "link", std::move(label), {}}; }
Element text(std::string bid, std::string label) { return {std::move(bid), "text", std::move(label), {}}; }

SimTaskScript contact_form() {
  const std::string url = "http://shop.sim/contact";
  return ScriptBuilder("sim.contact_form", "Send the store a message saying 'Where is my order?'", "shopping")
      .state("empty", {"Contact Us", url, {box("14", "Message"), button("15", "Submit")}})
      .state("filled", {"Contact Us", url, {box("14", "Message", "Where is my order?"), button("15", "Submit")}})
      .state("sent", {"Thank you", url + "/sent", {text("16", "Your message has been sent.")}}, true)
      .edge("empty", "fill('14', 'Where is my order?')", "filled")
      .edge("filled", "click('15')", "sent")
      .build();
}

SimTaskScript newsletter() {
  const std::string url = "http://shop.sim/newsletter";
  auto page = [&](std::string email, bool terms) {
    return Page{"Newsletter",
                url,
                {box("21", "Email", std::move(email)),
                 Element{"23", "checkbox", "I accept the terms", terms ? "checked" : ""}, button("22", "Subscribe")}};
  };
  const std::string email = "alice@example.com";
  return ScriptBuilder("sim.newsletter", "Sign up for the weekly newsletter with the email alice@example.com",
                       "shopping")
      .state("blank", page("", false))
      .state("email", page(email, false))
      .state("terms", page("", true))
      .state("ready", page(email, true))
      .state("subscribed", {"Subscribed", url + "/ok", {text("24", "Thanks for subscribing!")}}, true)
      .edge("blank", "fill('21', 'alice@example.com')", "email")
      .edge("blank", "click('23')", "terms")
      .edge("email", "click('23')", "ready")
      .edge("terms", "fill('21', 'alice@example.com')", "ready")
      .edge("ready", "click('22')", "subscribed")
      .build();
}

SimTaskScript bruxism() {
  return ScriptBuilder("sim.bruxism", "Buy something to alleviate sleep bruxism", "shopping")
      .state("home", {"One Stop Market", "http://shop.sim/", {box("31", "Search"), button("32", "Search")}})
      .state("query", {"One Stop Market", "http://shop.sim/", {box("31", "Search", "mouth guard"), button("32", "Search")}})
      .state("results",
             {"Search results for 'mouth guard'",
              "http://shop.sim/search?q=mouth+guard",
              {link("41", "Night Guard for Teeth Grinding"), link("45", "Sports Mouth Guard")}})
      .state("product",
             {"Night Guard for Teeth Grinding", "http://shop.sim/p/night-guard", {text("46", "$19.99"), button("42", "Add to Cart")}})
      .state("cart", {"Shopping Cart", "http://shop.sim/cart", {text("47", "1 item"), button("43", "Proceed to Checkout")}})
      .state("checkout", {"Checkout", "http://shop.sim/checkout", {button("44", "Place Order")}})
      .state("ordered", {"Order Confirmed", "http://shop.sim/checkout/success", {text("48", "Order #000178 placed")}}, true)
      .edge("home", "fill('31', 'mouth guard')", "query")
      .edge("query", "click('32')", "results")
      .edge("results", "click('41')", "product")
      .edge("product", "click('42')", "cart")
      .edge("cart", "click('43')", "checkout")
      .edge("checkout", "click('44')", "ordered")
      .build();
}

SimTaskScript reduce_price() {
  const std::string url = "http://admin.sim/catalog/product/edit/1481";
  return ScriptBuilder("sim.reduce_price", "Reduce the price of this product by 10%", "shopping_admin")
      .state("loaded", {"Product: Ida Workout Parachute Pant", url, {box("52", "Price", "50.00"), button("53", "Save")}})
      .state("edited", {"Product: Ida Workout Parachute Pant", url, {box("52", "Price", "45.00"), button("53", "Save")}})
      .state("saved", {"Product saved", url, {text("54", "You saved the product.")}}, true)
      .edge("loaded", "fill('52', '45.00')", "edited")
      .edge("edited", "click('53')", "saved")
      .build();
}

SimTaskScript walk_time() {
  const std::string url = "http://map.sim/directions";
  auto page = [&](std::string from, std::string to, std::string mode) {
    return Page{"Directions",
                url,
                {box("61", "From", std::move(from)), box("62", "To", std::move(to)),
                 Element{"63", "combobox", "Mode", std::move(mode)}, button("64", "Go")}};
  };
  const std::string cmu = "Carnegie Mellon University";
  const std::string pitt = "University of Pittsburgh";
  return ScriptBuilder("sim.walk_time",
                       "How long does it take to walk from Carnegie Mellon University to Univ of Pittsburgh?", "map")
      .state("start", page("", "", "Car (OSRM)"))
      .state("from", page(cmu, "", "Car (OSRM)"))
      .state("to", page(cmu, pitt, "Car (OSRM)"))
      .state("mode", page(cmu, pitt, "Foot (OSRM)"))
      .state("route", {"Directions", url + "?route=foot", {text("65", "Distance: 1.6km. Time: 0:18.")}})
      .state("answered", {"Directions", url + "?route=foot", {text("65", "Distance: 1.6km. Time: 0:18.")}}, true)
      .edge("start", "fill('61', 'Carnegie Mellon University')", "from")
      .edge("from", "fill('62', 'University of Pittsburgh')", "to")
      .edge("to", "select_option('63', 'Foot (OSRM)')", "mode")
      .edge("mode", "click('64')", "route")
      .edge("route", "stop('18 min')", "answered")
      .build();
}

SimTaskScript gitlab_star() {
  return ScriptBuilder("sim.gitlab_star", "Star the a11yproject repository", "gitlab")
      .state("dashboard", {"Projects · Dashboard", "http://gitlab.sim/", {link("70", "a11yproject.com")}})
      .state("project", {"a11yproject.com", "http://gitlab.sim/a11yproject", {button("71", "Star"), text("72", "Stars 21")}})
      .state("starred", {"a11yproject.com", "http://gitlab.sim/a11yproject", {button("71", "Unstar"), text("72", "Stars 22")}},
             true)
      .edge("dashboard", "goto('http://gitlab.sim/a11yproject')", "project")
      .edge("dashboard", "click('70')", "project")
      .edge("project", "click('71')", "starred")
      .build();
}

SimTaskScript forum_post() {
  const std::string url = "http://forum.sim/f/books";
  return ScriptBuilder("sim.forum_post", "Create a post titled 'Hello readers' in the books forum", "reddit")
      .state("forum", {"/f/books", url, {button("81", "Submit a new post")}})
      .state("form", {"Create submission", url + "/new", {box("82", "Title"), button("84", "Create submission")}})
      .state("titled", {"Create submission", url + "/new", {box("82", "Title", "Hello readers"), button("84", "Create submission")}})
      .state("posted", {"Hello readers", url + "/1", {text("85", "Hello readers")}}, true)
      .edge("forum", "click('81')", "form")
      .edge("form", "fill('82', 'Hello readers')", "titled")
      .edge("titled", "click('84')", "posted")
      .build();
}

SimTaskScript issue_close() {
  const std::string url = "http://gitlab.sim/byteblaze/dotfiles";
  return ScriptBuilder("sim.issue_close", "Close issue #42 in the dotfiles project", "gitlab")
      .state("project", {"dotfiles", url, {link("91", "Issues")}})
      .state("issues", {"Issues · dotfiles", url + "/-/issues", {link("92", "#42 Broken zshrc"), link("95", "#41 Typo")}})
      .state("issue", {"#42 Broken zshrc", url + "/-/issues/42", {button("93", "Close issue")}})
      .state("closed", {"#42 Broken zshrc", url + "/-/issues/42", {text("94", "Closed")}}, true)
      .edge("project", "click('91')", "issues")
      .edge("issues", "click('92')", "issue")
      .edge("issue", "click('93')", "closed")
      .build();
}

SimTaskScript address_update() {
  const std::string url = "http://shop.sim/customer/address";
  return ScriptBuilder("sim.address_update", "Update my shipping address to 5000 Forbes Ave", "shopping")
      .state("home", {"My Account", "http://shop.sim/customer", {link("101", "Address Book")}})
      .state("book", {"Address Book", url, {box("102", "Street Address", "123 Main St"), button("103", "Save Address")}})
      .state("typed", {"Address Book", url, {box("102", "Street Address", "5000 Forbes Ave"), button("103", "Save Address")}})
      .state("saved", {"Address Book", url, {text("104", "You saved the address.")}}, true)
      .edge("home", "click('101')", "book")
      .edge("book", "fill('102', '5000 Forbes Ave')", "typed")
      .edge("typed", "click('103')", "saved")
      .build();
}

SimTaskScript order_count() {
  return ScriptBuilder("sim.order_count", "How many orders did I place in March 2023? Answer with the number.",
                       "shopping")
      .state("account", {"My Account", "http://shop.sim/customer", {link("111", "My Orders")}})
      .state("orders",
             {"My Orders",
              "http://shop.sim/sales/order/history",
              {text("112", "#170 3/2/23"), text("113", "#171 3/11/23"), text("114", "#175 3/31/23"),
               text("115", "#176 4/1/23")}})
      .state("answered", {"My Orders", "http://shop.sim/sales/order/history", {text("116", "Answer submitted")}}, true)
      .edge("account", "click('111')", "orders")
      .edge("orders", "stop('3')", "answered")
      .build();
}

SimTaskScript loopback_echo() {
  const std::string url = "http://loopback.sim/echo";
  return ScriptBuilder(std::string(kLoopbackTaskId), "Type ping into the echo box and send it", "conformance")
      .state("idle", {"Echo", url, {box("1", "Echo"), button("2", "Send")}})
      .state("typed", {"Echo", url, {box("1", "Echo", "ping"), button("2", "Send")}})
      .state("echoed", {"Echo", url, {text("3", "pong")}}, true)
      .edge("idle", "fill('1', 'ping')", "typed")
      .edge("typed", "click('2')", "echoed")
      .build();
}

}  // namespace

std::vector<SimTaskScript> builtin_sim_tasks() {
  return {contact_form(), newsletter(),  bruxism(),     reduce_price(),   walk_time(),   gitlab_star(),
          forum_post(),   issue_close(), address_update(), order_count(), loopback_echo()};
}

std::shared_ptr<const SimWorld> builtin_sim_world() {
  static const auto world = std::make_shared<const SimWorld>(builtin_sim_tasks());
  return world;
}

}  // namespace planahead
