import { ApiClient } from "./api";
import { ConsoleApp } from "./app";

const root = document.querySelector<HTMLElement>("#app");
if (!root) throw new Error("missing #app mount point");

// the session id lives in the URL hash, so a reload reattaches and replays
const app = new ConsoleApp(root, new ApiClient(""), {
  onSession: (id) => {
    window.location.hash = id;
  },
});

const sid = window.location.hash.slice(1);
if (sid) app.openSession(sid);
