import { ApiClient } from "./api.js";
import { Viewer } from "./viewer.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8000";

new Viewer(new ApiClient(baseUrl));
