// Account pages: profile editing, saved-article library, full data
// export, and account deletion behind a confirmation prompt.

import {
  ApiError,
  deleteAccount,
  exportData,
  getLibrary,
  getProfile,
  Profile,
  updateProfile,
} from "./api.js";
import { clear, el } from "./markup.js";
import { clearSession } from "./session.js";

const WEEKDAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

// Hands the export to the browser as a .json file. Kept separate so
// tests can stub it; object URLs are not available in every DOM.
export function saveJsonFile(filename: string, data: unknown): void {
  const text = JSON.stringify(data, null, 2);
  try {
    const blob = new Blob([text], { type: "application/json" });
    const anchor = document.createElement("a");
    anchor.href = URL.createObjectURL(blob);
    anchor.download = filename;
    anchor.click();
    URL.revokeObjectURL(anchor.href);
  } catch {
    // no-op outside a real browser
  }
}

function profileForm(root: HTMLElement, profile: Profile): HTMLFormElement {
  const form = el("form", "profile-form") as HTMLFormElement;
  form.appendChild(el("h2", "", "Your profile"));

  const nameWrap = el("label", "form-field");
  nameWrap.appendChild(el("span", "", "Name"));
  const nameInput = el("input") as HTMLInputElement;
  nameInput.value = profile.name;
  nameWrap.appendChild(nameInput);
  form.appendChild(nameWrap);

  const emailWrap = el("label", "form-field");
  emailWrap.appendChild(el("span", "", "Email"));
  const emailInput = el("input") as HTMLInputElement;
  emailInput.type = "email";
  emailInput.value = profile.email;
  emailWrap.appendChild(emailInput);
  form.appendChild(emailWrap);

  const topicsWrap = el("label", "form-field");
  topicsWrap.appendChild(el("span", "", "Topics (comma separated)"));
  const topicsInput = el("input", "profile-topics") as HTMLInputElement;
  topicsInput.value = profile.topics.join(", ");
  topicsWrap.appendChild(topicsInput);
  form.appendChild(topicsWrap);

  const freqWrap = el("label", "form-field");
  freqWrap.appendChild(el("span", "", "Digest frequency"));
  const freqSelect = el("select") as HTMLSelectElement;
  for (const value of ["daily", "weekly"]) {
    const option = el("option", "", value) as HTMLOptionElement;
    option.value = value;
    freqSelect.appendChild(option);
  }
  freqSelect.value = profile.digest_frequency;
  freqWrap.appendChild(freqSelect);
  form.appendChild(freqWrap);

  const dayWrap = el("label", "form-field");
  dayWrap.appendChild(el("span", "", "Weekly digest day"));
  const daySelect = el("select") as HTMLSelectElement;
  WEEKDAYS.forEach((day, index) => {
    const option = el("option", "", day) as HTMLOptionElement;
    option.value = String(index);
    daySelect.appendChild(option);
  });
  daySelect.value = String(profile.weekly_digest_day ?? 0);
  dayWrap.appendChild(daySelect);
  form.appendChild(dayWrap);

  const linksWrap = el("label", "form-field");
  linksWrap.appendChild(el("span", "", "Links (homepage, DBLP, ...)"));
  const linksInput = el("input") as HTMLInputElement;
  linksInput.value = profile.external_links.join(", ");
  linksWrap.appendChild(linksInput);
  form.appendChild(linksWrap);

  const submit = el("button", "profile-save", "Save profile") as HTMLButtonElement;
  submit.type = "submit";
  form.appendChild(submit);
  const status = el("p", "profile-status");
  form.appendChild(status);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const splitList = (raw: string) =>
      raw
        .split(",")
        .map((t) => t.trim())
        .filter((t) => t.length > 0);
    const frequency = freqSelect.value;
    updateProfile({
      name: nameInput.value.trim(),
      email: emailInput.value.trim(),
      topics: splitList(topicsInput.value),
      digest_frequency: frequency,
      weekly_digest_day: frequency === "weekly" ? Number(daySelect.value) : null,
      external_links: splitList(linksInput.value),
    })
      .then((updated) => {
        topicsInput.value = updated.topics.join(", ");
        status.textContent = "Profile saved.";
        status.className = "profile-status ok";
      })
      .catch((err) => {
        status.textContent = err instanceof ApiError ? err.message : "could not save profile";
        status.className = "profile-status error";
      });
  });

  return form;
}

function dangerZone(root: HTMLElement, userId: string, onSignedOut: () => void): HTMLElement {
  const zone = el("section", "danger-zone");
  zone.appendChild(el("h2", "", "Your data"));

  const exportButton = el("button", "export-button", "Download everything we store about you") as HTMLButtonElement;
  exportButton.addEventListener("click", () => {
    exportButton.disabled = true;
    exportData()
      .then((dump) => saveJsonFile(`${userId}.json`, dump))
      .catch(() => undefined)
      .finally(() => {
        exportButton.disabled = false;
      });
  });
  zone.appendChild(exportButton);

  const deleteButton = el("button", "delete-button", "Delete my account") as HTMLButtonElement;
  deleteButton.addEventListener("click", () => {
    if (!window.confirm("Delete your account and all associated data? This cannot be undone.")) {
      return;
    }
    deleteAccount()
      .then(() => {
        clearSession();
        onSignedOut();
      })
      .catch(() => undefined);
  });
  zone.appendChild(deleteButton);
  return zone;
}

export async function renderAccount(root: HTMLElement, onSignedOut: () => void): Promise<void> {
  clear(root);
  root.appendChild(el("p", "status", "Loading your profile..."));
  let profile: Profile;
  try {
    profile = await getProfile();
  } catch (err) {
    clear(root);
    root.appendChild(el("p", "status", err instanceof Error ? err.message : "could not load profile"));
    return;
  }
  clear(root);
  root.appendChild(profileForm(root, profile));
  root.appendChild(dangerZone(root, profile.user_id, onSignedOut));
}

export async function renderLibrary(root: HTMLElement): Promise<void> {
  clear(root);
  root.appendChild(el("p", "status", "Loading your library..."));
  let result;
  try {
    result = await getLibrary();
  } catch (err) {
    clear(root);
    root.appendChild(el("p", "status", err instanceof Error ? err.message : "could not load library"));
    return;
  }
  clear(root);
  root.appendChild(el("h2", "", "Saved articles"));
  if (result.articles.length === 0) {
    root.appendChild(el("p", "status", "Nothing saved yet. Save articles from your feed."));
    return;
  }
  const list = el("ul", "library-list");
  for (const entry of result.articles) {
    const item = el("li", "library-item");
    const link = el("a", "", entry.title) as HTMLAnchorElement;
    link.href = entry.url;
    link.target = "_blank";
    link.rel = "noopener";
    item.appendChild(link);
    item.appendChild(el("span", "library-authors", ` ${entry.authors.join(", ")}`));
    list.appendChild(item);
  }
  root.appendChild(list);
}
