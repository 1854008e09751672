import { Dashboard } from "./dashboard.js";

// one config value: API base (same origin when served by the gateway)
const base = (window as unknown as { HATCHSENS_API?: string }).HATCHSENS_API ?? "";

new Dashboard(base).start().catch((err) => {
  const banner = document.getElementById("conn-banner");
  if (banner) {
    banner.style.display = "block";
    banner.textContent = `gateway unreachable: ${err}`;
  }
});
