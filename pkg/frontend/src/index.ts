export { ApiClient, ApiError } from "./api.js";
export { ReviewSession } from "./session.js";
export { buildDashboard, clusterBadges } from "./dashboard.js";
export { mountApp } from "./app.js";
export type * from "./types.js";
